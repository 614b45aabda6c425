#include "ddci/storage.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ddci {

namespace {

constexpr std::uint8_t kDtypeReal = 1;
constexpr std::uint8_t kDtypeComplex = 2;
constexpr std::size_t kMaxRank = 8;
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

/// Bounds-checked little-endian cursor; every read failure is a FormatError.
class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::size_t remaining() const { return size_ - pos_; }

    const std::uint8_t* take(std::size_t n, const char* what) {
        if (remaining() < n)
            throw FormatError(std::string("truncated input while reading ") + what);
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    std::uint8_t u8(const char* what) { return *take(1, what); }

    std::uint32_t u32(const char* what) {
        const std::uint8_t* p = take(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64(const char* what) {
        const std::uint8_t* p = take(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }

    double f64(const char* what) {
        const std::uint64_t bits = u64(what);
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }

    void expect_magic(const char* magic) {
        const std::uint8_t* p = take(4, "magic");
        if (std::memcmp(p, magic, 4) != 0)
            throw FormatError(std::string("bad magic, expected ") + magic);
    }

    void expect_end() {
        if (remaining() != 0) throw FormatError("trailing bytes after payload");
    }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

struct TensorHeader {
    std::uint8_t dtype;
    std::vector<std::size_t> dims;
    std::size_t count;  // product of dims
};

// Validates the header and the implied payload length against what the
// reader actually holds, before any payload allocation.
TensorHeader read_tensor_header(Reader& r) {
    r.expect_magic("DDT1");
    TensorHeader h;
    h.dtype = r.u8("dtype");
    if (h.dtype != kDtypeReal && h.dtype != kDtypeComplex)
        throw FormatError("unknown dtype code " + std::to_string(h.dtype));
    const std::uint8_t rank = r.u8("rank");
    if (rank == 0 || rank > kMaxRank)
        throw FormatError("rank out of range: " + std::to_string(rank));
    h.count = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32("dim");
        if (d == 0) throw FormatError("zero dimension in header");
        if (h.count > SIZE_MAX / d) throw FormatError("dimension product overflows");
        h.count *= d;
        h.dims.push_back(d);
    }
    const std::size_t bytes_per = h.dtype == kDtypeComplex ? 16 : 8;
    if (h.count > SIZE_MAX / bytes_per || h.count * bytes_per != r.remaining())
        throw FormatError("payload length does not match header");
    return h;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw FormatError("read failure: " + path);
    return bytes;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const RealTensor& t) {
    std::vector<std::uint8_t> out;
    out.reserve(6 + 4 * t.rank() + 8 * t.size());
    out.insert(out.end(), {'D', 'D', 'T', '1'});
    out.push_back(kDtypeReal);
    if (t.rank() > kMaxRank) throw FormatError("tensor rank exceeds format limit");
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) {
        if (d > UINT32_MAX) throw FormatError("dimension exceeds u32");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
    return out;
}

std::vector<std::uint8_t> encode_tensor(const ComplexImage& x) {
    std::vector<std::uint8_t> out;
    out.reserve(6 + 12 + 16 * x.size());
    out.insert(out.end(), {'D', 'D', 'T', '1'});
    out.push_back(kDtypeComplex);
    out.push_back(3);
    put_u32(out, static_cast<std::uint32_t>(x.coils()));
    put_u32(out, static_cast<std::uint32_t>(x.height()));
    put_u32(out, static_cast<std::uint32_t>(x.width()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        put_f64(out, x[i].real());
        put_f64(out, x[i].imag());
    }
    return out;
}

RealTensor decode_real_tensor(const std::uint8_t* data, std::size_t size) {
    Reader r(data, size);
    const TensorHeader h = read_tensor_header(r);
    if (h.dtype != kDtypeReal) throw FormatError("expected a real tensor, found complex");
    RealTensor t(h.dims);
    for (std::size_t i = 0; i < h.count; ++i) t[i] = r.f64("payload");
    r.expect_end();
    return t;
}

ComplexImage decode_complex_image(const std::uint8_t* data, std::size_t size) {
    Reader r(data, size);
    const TensorHeader h = read_tensor_header(r);
    if (h.dtype != kDtypeComplex) throw FormatError("expected a complex tensor, found real");
    if (h.dims.size() != 3) throw FormatError("complex image must have rank 3 (coils, H, W)");
    if (h.dims[1] % 2 != 0 || h.dims[2] % 2 != 0)
        throw FormatError("complex image dims must be even");
    ComplexImage x(h.dims[0], h.dims[1], h.dims[2]);
    for (std::size_t i = 0; i < h.count; ++i) {
        const double re = r.f64("payload");
        const double im = r.f64("payload");
        x[i] = cplx(re, im);
    }
    r.expect_end();
    return x;
}

void write_tensor(const std::string& path, const RealTensor& t) {
    atomic_write_file(path, encode_tensor(t));
}

void write_tensor(const std::string& path, const ComplexImage& x) {
    atomic_write_file(path, encode_tensor(x));
}

RealTensor read_real_tensor(const std::string& path) {
    const auto bytes = read_file(path);
    return decode_real_tensor(bytes.data(), bytes.size());
}

ComplexImage read_complex_image(const std::string& path) {
    const auto bytes = read_file(path);
    return decode_complex_image(bytes.data(), bytes.size());
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'D', 'D', 'C', 'K'});
    put_u32(out, kCheckpointVersion);
    put_u64(out, fnv1a64(ck.config_text));
    if (ck.config_text.size() > UINT32_MAX) throw FormatError("config text too large");
    put_u32(out, static_cast<std::uint32_t>(ck.config_text.size()));
    out.insert(out.end(), ck.config_text.begin(), ck.config_text.end());
    put_u64(out, ck.steps_done);
    put_u64(out, ck.epochs_done);
    put_u64(out, ck.optim.step);
    put_f64(out, ck.optim.hyper.lr);
    put_f64(out, ck.optim.hyper.beta1);
    put_f64(out, ck.optim.hyper.beta2);
    put_f64(out, ck.optim.hyper.eps);

    std::vector<std::pair<std::string, const RealTensor*>> entries;
    std::size_t idx = 0;
    for_each_tensor(ck.params, [&](const std::string& name, const RealTensor& t) {
        if (idx >= ck.optim.m.size()) throw FormatError("optimizer state shorter than params");
        entries.emplace_back(name, &t);
        entries.emplace_back(name + ".m", &ck.optim.m[idx]);
        entries.emplace_back(name + ".v", &ck.optim.v[idx]);
        ++idx;
    });
    if (idx != ck.optim.m.size() || idx != ck.optim.v.size())
        throw FormatError("optimizer state does not match parameter count");

    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, tensor] : entries) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        const std::vector<std::uint8_t> blob = encode_tensor(*tensor);
        put_u64(out, blob.size());
        out.insert(out.end(), blob.begin(), blob.end());
    }
    atomic_write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    const auto bytes = read_file(path);
    Reader r(bytes.data(), bytes.size());
    r.expect_magic("DDCK");
    Checkpoint ck;
    ck.version = r.u32("version");
    if (ck.version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(ck.version));
    const std::uint64_t digest = r.u64("digest");
    const std::uint32_t cfg_len = r.u32("config length");
    const std::uint8_t* cfg_bytes = r.take(cfg_len, "config text");
    ck.config_text.assign(reinterpret_cast<const char*>(cfg_bytes), cfg_len);
    if (fnv1a64(ck.config_text) != digest)
        throw FormatError("config digest mismatch (corrupt or tampered checkpoint)");
    ck.steps_done = r.u64("steps");
    ck.epochs_done = r.u64("epochs");
    ck.optim.step = r.u64("adam step");
    ck.optim.hyper.lr = r.f64("lr");
    ck.optim.hyper.beta1 = r.f64("beta1");
    ck.optim.hyper.beta2 = r.f64("beta2");
    ck.optim.hyper.eps = r.f64("eps");

    const CascadeConfig ccfg = cascade_config_from_text(ck.config_text);
    ck.params = zero_model(ccfg);
    ck.optim.m.clear();
    ck.optim.v.clear();

    const std::uint32_t n_entries = r.u32("tensor count");
    std::vector<std::pair<std::string, RealTensor>> loaded;
    loaded.reserve(n_entries);
    for (std::uint32_t e = 0; e < n_entries; ++e) {
        const std::uint32_t name_len = r.u32("name length");
        const std::uint8_t* name_bytes = r.take(name_len, "tensor name");
        std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
        const std::uint64_t blob_len = r.u64("blob length");
        if (blob_len > r.remaining()) throw FormatError("truncated tensor blob");
        const std::uint8_t* blob = r.take(blob_len, "tensor blob");
        loaded.emplace_back(std::move(name), decode_real_tensor(blob, blob_len));
    }
    r.expect_end();

    std::size_t cursor = 0;
    const auto next = [&loaded, &cursor](const std::string& want) -> RealTensor& {
        if (cursor >= loaded.size())
            throw FormatError("checkpoint is missing tensor " + want);
        if (loaded[cursor].first != want)
            throw FormatError("unexpected tensor order: found " + loaded[cursor].first +
                              ", wanted " + want);
        return loaded[cursor++].second;
    };
    for_each_tensor(ck.params, [&](const std::string& name, RealTensor& t) {
        RealTensor& value = next(name);
        if (!value.same_shape(t))
            throw FormatError("tensor shape mismatch for " + name);
        t = std::move(value);
        RealTensor& m = next(name + ".m");
        RealTensor& v = next(name + ".v");
        if (!m.same_shape(t) || !v.same_shape(t))
            throw FormatError("optimizer moment shape mismatch for " + name);
        ck.optim.m.push_back(std::move(m));
        ck.optim.v.push_back(std::move(v));
    });
    if (cursor != loaded.size()) throw FormatError("extra tensors in checkpoint");
    return ck;
}

void export_pgm(const RealTensor& img, const std::string& path) {
    if (img.rank() != 2) throw ShapeError("export_pgm expects a 2D tensor");
    double lo = img[0], hi = img[0];
    for (std::size_t i = 0; i < img.size(); ++i) {
        lo = std::min(lo, img[i]);
        hi = std::max(hi, img[i]);
    }
    const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;

    char header[64];
    const int header_len = std::snprintf(header, sizeof(header), "P5\n%zu %zu\n65535\n",
                                         img.dim(1), img.dim(0));
    std::vector<std::uint8_t> out(header, header + header_len);
    out.reserve(out.size() + 2 * img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const auto v = static_cast<std::uint16_t>(std::lround((img[i] - lo) * scale));
        out.push_back(static_cast<std::uint8_t>(v >> 8));  // PGM samples are big-endian
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    atomic_write_file(path, out);
}

void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open for writing: " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failure: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("rename failed for " + path + ": " + ec.message());
}

void atomic_write_text(const std::string& path, const std::string& text) {
    atomic_write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

namespace {

std::string case_file(std::size_t idx, const char* kind) {
    return "case_" + std::to_string(idx) + "_" + kind + ".ddt";
}

}  // namespace

void save_dataset(const std::string& dir, const std::vector<PhantomCase>& cases,
                  const std::vector<std::pair<std::string, std::string>>& config_lines) {
    std::filesystem::create_directories(dir);
    std::string manifest;
    for (const auto& [k, v] : config_lines) manifest += k + "=" + v + "\n";
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string kf = case_file(i, "kfull");
        const std::string im = case_file(i, "imgfull");
        const std::string se = case_file(i, "sens");
        write_tensor(dir + "/" + kf, cases[i].k_full);
        write_tensor(dir + "/" + im, cases[i].image_full);
        write_tensor(dir + "/" + se, cases[i].sens.maps);
        manifest += "case=" + std::to_string(i) + " kfull=" + kf + " imgfull=" + im +
                    " sens=" + se + "\n";
    }
    atomic_write_text(dir + "/manifest.txt", manifest);
}

StoredDataset load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/manifest.txt");
    if (!in) throw FormatError("cannot open manifest: " + dir + "/manifest.txt");
    StoredDataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("case=", 0) == 0) {
            std::istringstream ls(line);
            std::string tok;
            std::string kfull, imgfull, sens;
            while (ls >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) throw FormatError("malformed manifest line: " + line);
                const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "kfull") kfull = val;
                else if (key == "imgfull") imgfull = val;
                else if (key == "sens") sens = val;
            }
            if (kfull.empty() || imgfull.empty() || sens.empty())
                throw FormatError("manifest case line missing files: " + line);
            PhantomCase pc;
            pc.k_full = read_complex_image(dir + "/" + kfull);
            pc.image_full = read_complex_image(dir + "/" + imgfull);
            pc.sens = SensitivitySet{read_complex_image(dir + "/" + sens)};
            ds.cases.push_back(std::move(pc));
        } else {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw FormatError("malformed manifest line: " + line);
            ds.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        }
    }
    return ds;
}

}  // namespace ddci
