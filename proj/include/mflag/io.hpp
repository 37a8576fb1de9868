// File formats.
//
// Embedding file ("MFEM"): magic, version u32, rows u32, cols u32, then
// little-endian float32 row-major payload. Lossy (float32) by design; meant
// for exported features, not for checkpoint state.
//
// Checkpoint file ("MFLG"): magic, version u32, vision/text layer counts,
// a layer table (in_dim, out_dim, activation code, trainable flag) covering
// vision layers, the projector, then text layers, followed by each layer's
// weight and bias as little-endian float64 row-major. Round-trips bit-exactly.
//
// CSV: numeric matrices with one header row.

#pragma once

#include <string>
#include <vector>

#include "mflag/models.hpp"
#include "mflag/numerics.hpp"

namespace mflag {

// snprintf "%.12g" rendering used for every float that lands in a CSV, so
// repeated runs produce byte-identical text output.
std::string format_g12(double v);

void write_embedding_mfem(const std::string& path, const Matrix& m);
Matrix read_embedding_mfem(const std::string& path);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

// Header row is written from `header` (sized cols) and skipped on read.
void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& header);
Matrix read_matrix_csv(const std::string& path);

// True when the file starts with the 4-byte embedding magic. Lets the CLI
// accept either an embedding file or a CSV for the same flag.
bool looks_like_mfem(const std::string& path);

}  // namespace mflag
