#include "mflag/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mflag/errors.hpp"

namespace mflag {

namespace {

constexpr char kEmbedMagic[4] = {'M', 'F', 'E', 'M'};
constexpr char kCkptMagic[4] = {'M', 'F', 'L', 'G'};
constexpr std::uint32_t kEmbedVersion = 1;
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& buf, float v) {
    put_u32(buf, std::bit_cast<std::uint32_t>(v));
}

void put_f64(std::string& buf, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    put_u32(buf, static_cast<std::uint32_t>(bits & 0xffffffffull));
    put_u32(buf, static_cast<std::uint32_t>(bits >> 32));
}

class ByteReader {
  public:
    ByteReader(std::string bytes, std::string path)
        : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + i]);
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    double f64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return std::bit_cast<double>(lo | (hi << 32));
    }

    void expect_magic(const char (&magic)[4], const char* kind) {
        need(4);
        for (int i = 0; i < 4; ++i) {
            if (bytes_[pos_ + i] != magic[i])
                throw IoError(path_ + ": not a " + kind + " file (bad magic)");
        }
        pos_ += 4;
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

    void check_exhausted() {
        if (!exhausted()) throw IoError(path_ + ": trailing bytes after payload");
    }

  private:
    void need(std::size_t n) {
        if (bytes_.size() - pos_ < n)
            throw IoError(path_ + ": truncated file");
    }

    std::string bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) throw IoError("read failed on " + path);
    return std::move(ss).str();
}

void dump(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out.good()) throw IoError("write failed on " + path);
}

void put_layer_table_entry(std::string& buf, const Layer& layer) {
    put_u32(buf, static_cast<std::uint32_t>(layer.spec.in_dim));
    put_u32(buf, static_cast<std::uint32_t>(layer.spec.out_dim));
    put_u32(buf, static_cast<std::uint32_t>(layer.spec.activation));
    put_u32(buf, layer.spec.trainable ? 1u : 0u);
}

void put_layer_payload(std::string& buf, const Layer& layer) {
    for (double v : layer.weight.data) put_f64(buf, v);
    for (double v : layer.bias.data) put_f64(buf, v);
}

LayerSpec read_layer_spec(ByteReader& r, const std::string& path) {
    LayerSpec spec;
    spec.in_dim = r.u32();
    spec.out_dim = r.u32();
    const std::uint32_t act = r.u32();
    if (act > static_cast<std::uint32_t>(Activation::relu))
        throw IoError(path + ": unknown activation code");
    spec.activation = static_cast<Activation>(act);
    spec.trainable = r.u32() != 0;
    if (spec.in_dim == 0 || spec.out_dim == 0)
        throw IoError(path + ": zero layer dimension in table");
    return spec;
}

Layer read_layer_payload(ByteReader& r, const LayerSpec& spec) {
    Layer layer;
    layer.spec = spec;
    layer.weight = Matrix(spec.in_dim, spec.out_dim);
    layer.bias = Matrix(1, spec.out_dim);
    for (double& v : layer.weight.data) v = r.f64();
    for (double& v : layer.bias.data) v = r.f64();
    return layer;
}

}  // namespace

std::string format_g12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_embedding_mfem(const std::string& path, const Matrix& m) {
    std::string buf;
    buf.reserve(16 + 4 * m.data.size());
    buf.append(kEmbedMagic, 4);
    put_u32(buf, kEmbedVersion);
    put_u32(buf, static_cast<std::uint32_t>(m.rows));
    put_u32(buf, static_cast<std::uint32_t>(m.cols));
    for (double v : m.data) put_f32(buf, static_cast<float>(v));
    dump(path, buf);
}

Matrix read_embedding_mfem(const std::string& path) {
    ByteReader r(slurp(path), path);
    r.expect_magic(kEmbedMagic, "MFEM embedding");
    const std::uint32_t version = r.u32();
    if (version != kEmbedVersion)
        throw IoError(path + ": unsupported embedding format version");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix m(rows, cols);
    for (double& v : m.data) v = static_cast<double>(r.f32());
    r.check_exhausted();
    return m;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    std::string buf;
    buf.append(kCkptMagic, 4);
    put_u32(buf, kCkptVersion);
    put_u32(buf, static_cast<std::uint32_t>(params.vision_layers.size()));
    put_u32(buf, static_cast<std::uint32_t>(params.text_layers.size()));
    for (const Layer& l : params.vision_layers) put_layer_table_entry(buf, l);
    put_layer_table_entry(buf, params.projector);
    for (const Layer& l : params.text_layers) put_layer_table_entry(buf, l);
    for (const Layer& l : params.vision_layers) put_layer_payload(buf, l);
    put_layer_payload(buf, params.projector);
    for (const Layer& l : params.text_layers) put_layer_payload(buf, l);
    dump(path, buf);
}

ModelParams load_checkpoint(const std::string& path) {
    ByteReader r(slurp(path), path);
    r.expect_magic(kCkptMagic, "checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kCkptVersion)
        throw IoError(path + ": unsupported checkpoint format version");
    const std::uint32_t n_vision = r.u32();
    const std::uint32_t n_text = r.u32();
    if (n_vision == 0 || n_text == 0)
        throw IoError(path + ": checkpoint must contain both towers");

    std::vector<LayerSpec> specs;
    specs.reserve(n_vision + 1 + n_text);
    for (std::uint32_t i = 0; i < n_vision + 1 + n_text; ++i)
        specs.push_back(read_layer_spec(r, path));

    ModelParams params;
    std::size_t s = 0;
    for (std::uint32_t i = 0; i < n_vision; ++i)
        params.vision_layers.push_back(read_layer_payload(r, specs[s++]));
    params.projector = read_layer_payload(r, specs[s++]);
    for (std::uint32_t i = 0; i < n_text; ++i)
        params.text_layers.push_back(read_layer_payload(r, specs[s++]));
    r.check_exhausted();
    return params;
}

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& header) {
    if (header.size() != m.cols)
        throw IoError("write_matrix_csv: header size does not match columns");
    std::string buf;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) buf.push_back(',');
        buf += header[j];
    }
    buf.push_back('\n');
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) buf.push_back(',');
            buf += format_g12(m(i, j));
        }
        buf.push_back('\n');
    }
    dump(path, buf);
}

Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path + ": empty CSV (missing header row)");

    std::vector<std::vector<double>> rows;
    std::size_t cols = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                throw IoError(path + ": non-numeric CSV cell '" + cell + "'");
            }
            while (used < cell.size() &&
                   (cell[used] == ' ' || cell[used] == '\t'))
                ++used;
            if (used != cell.size())
                throw IoError(path + ": non-numeric CSV cell '" + cell + "'");
            row.push_back(v);
        }
        if (rows.empty()) {
            cols = row.size();
            if (cols == 0) throw IoError(path + ": empty CSV data row");
        } else if (row.size() != cols) {
            throw IoError(path + ": ragged CSV row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": CSV has a header but no data");

    Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
    return m;
}

bool looks_like_mfem(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4) return false;
    for (int i = 0; i < 4; ++i)
        if (magic[i] != kEmbedMagic[i]) return false;
    return true;
}

}  // namespace mflag
