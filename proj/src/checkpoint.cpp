#include "msap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace msap {
namespace {

constexpr char kCheckpointMagic[8] = {'M', 'S', 'A', 'P', 'C', 'K', 'P', 'T'};
constexpr char kCorpusMagic[8] = {'M', 'S', 'A', 'P', 'C', 'O', 'R', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
        if (!out_) throw FormatError("cannot open '" + path.string() + "' for writing");
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    template <class U>
    void uint(U v) {
        unsigned char buf[sizeof(U)];
        for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(buf, sizeof(U));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    void finish() {
        out_.flush();
        if (!out_) throw FormatError("write to '" + path_.string() + "' failed");
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw FormatError("cannot open '" + path.string() + "'");
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw FormatError("'" + path_.string() + "' is truncated");
    }
    template <class U>
    U uint() {
        unsigned char buf[sizeof(U)];
        bytes(buf, sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
    void magic(const char (&expected)[8]) {
        char m[8];
        bytes(m, 8);
        if (std::memcmp(m, expected, 8) != 0) throw FormatError("'" + path_.string() + "' has the wrong magic");
        const auto version = uint<std::uint32_t>();
        if (version != kVersion) throw FormatError("'" + path_.string() + "' has unsupported version " + std::to_string(version));
    }

private:
    std::ifstream in_;
    std::filesystem::path path_;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params, const CheckpointHeader& header) {
    Writer w(path);
    w.bytes(kCheckpointMagic, 8);
    w.uint(kVersion);
    w.uint(header.config_hash);
    w.uint(header.seed);
    w.uint(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params.all()) {
        w.uint(static_cast<std::uint32_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.uint(static_cast<std::uint32_t>(p.value.rank()));
        for (auto e : p.value.shape()) w.uint(static_cast<std::uint64_t>(e));
        for (double v : p.value.data()) w.f64(v);
    }
    w.finish();
}

CheckpointHeader load_checkpoint(const std::filesystem::path& path, ParameterSet& params, std::optional<std::uint64_t> expected_hash) {
    Reader r(path);
    r.magic(kCheckpointMagic);
    CheckpointHeader header;
    header.config_hash = r.uint<std::uint64_t>();
    header.seed = r.uint<std::uint64_t>();
    if (expected_hash && *expected_hash != header.config_hash) {
        throw FormatError("checkpoint '" + path.string() + "' was written for a different model configuration");
    }
    const auto count = r.uint<std::uint32_t>();
    std::map<std::string, Tensor> stored;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(r.uint<std::uint32_t>(), '\0');
        r.bytes(name.data(), name.size());
        Shape shape(r.uint<std::uint32_t>());
        for (auto& e : shape) e = static_cast<std::size_t>(r.uint<std::uint64_t>());
        std::vector<double> values(numel(shape));
        for (auto& v : values) v = r.f64();
        stored.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    for (ParamId id = 0; id < params.size(); ++id) {
        const auto& p = params[id];
        auto it = stored.find(p.name);
        if (it == stored.end()) throw FormatError("checkpoint is missing parameter '" + p.name + "'");
        if (it->second.shape() != p.value.shape()) {
            throw FormatError("checkpoint parameter '" + p.name + "' has shape " + shape_str(it->second.shape()) + ", model expects " +
                              shape_str(p.value.shape()));
        }
        params.assign(id, std::vector<double>(it->second.data().begin(), it->second.data().end()));
    }
    if (stored.size() != params.size()) throw FormatError("checkpoint holds parameters the model does not have");
    return header;
}

void write_corpus_dump(const std::filesystem::path& path, const std::vector<FullVideo>& clips, const std::vector<ClipRecord>& records) {
    if (clips.size() != records.size()) throw ContractError("corpus dump: clip and record counts differ");
    if (clips.empty()) throw ContractError("corpus dump: no clips");
    const Shape frame = clips.front().frames.front().shape();
    const std::size_t T = clips.front().frame_count();
    Writer w(path);
    w.bytes(kCorpusMagic, 8);
    w.uint(kVersion);
    for (auto e : frame) w.uint(static_cast<std::uint32_t>(e));
    w.uint(static_cast<std::uint32_t>(T));
    w.uint(static_cast<std::uint64_t>(clips.size()));
    for (std::size_t i = 0; i < clips.size(); ++i) {
        if (clips[i].frame_count() != T) throw ContractError("corpus dump: clips differ in length");
        w.uint(static_cast<std::uint32_t>(records[i].label));
        w.uint(records[i].seed);
        for (const auto& f : clips[i].frames) {
            if (f.shape() != frame) throw ContractError("corpus dump: clips differ in frame shape");
            for (double v : f.data()) w.f32(static_cast<float>(v));
        }
    }
    w.finish();
}

CorpusDump read_corpus_dump(const std::filesystem::path& path) {
    Reader r(path);
    r.magic(kCorpusMagic);
    const std::size_t C = r.uint<std::uint32_t>(), H = r.uint<std::uint32_t>(), W = r.uint<std::uint32_t>();
    const std::size_t T = r.uint<std::uint32_t>();
    const auto count = r.uint<std::uint64_t>();
    CorpusDump dump;
    for (std::uint64_t i = 0; i < count; ++i) {
        ClipRecord rec;
        rec.label = r.uint<std::uint32_t>();
        rec.seed = r.uint<std::uint64_t>();
        FullVideo v;
        v.label = rec.label;
        v.id = "dump#" + std::to_string(i);
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<double> data(C * H * W);
            for (auto& x : data) x = r.f32();
            v.frames.emplace_back(Shape{C, H, W}, std::move(data));
        }
        dump.clips.push_back(std::move(v));
        dump.records.push_back(rec);
    }
    return dump;
}

}  // namespace msap
