#include "tadc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tadc/config.hpp"
#include "tadc/error.hpp"
#include "tadc/image.hpp"

namespace tadc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::Stage1: return "stage1";
        case Stage::Stage2: return "stage2";
        case Stage::Maps: return "maps";
    }
    return "unknown";
}

namespace {

constexpr char kMagic[4] = {'T', 'A', 'D', 'C'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        le(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

    const std::uint8_t* take(std::size_t n, const char* what) {
        if (n > in_.size() - pos_) fail(std::string("truncated while reading ") + what);
        const std::uint8_t* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <typename T>
    T le(const char* what) {
        const std::uint8_t* p = take(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
        return v;
    }
    std::string str(const char* what) {
        const auto n = le<std::uint32_t>(what);
        const std::uint8_t* p = take(n, what);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    bool at_end() const { return pos_ == in_.size(); }
    std::size_t remaining() const { return in_.size() - pos_; }
    [[noreturn]] void fail(const std::string& msg) const { throw CheckpointError(origin_ + ": " + msg); }

private:
    const std::vector<std::uint8_t>& in_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor_file(const TensorFile& file) {
    Writer w;
    w.bytes(kMagic, 4);
    w.le(kCheckpointVersion);
    w.le(static_cast<std::uint8_t>(file.stage));
    w.le(file.seed);
    w.str(file.header.dump());
    w.le(static_cast<std::uint32_t>(file.tensors.size()));
    for (const auto& [name, t] : file.tensors) {
        w.str(name);
        w.le(std::uint8_t{0});
        w.le(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) w.le(static_cast<std::uint64_t>(d));
        for (float v : t.data()) w.f32(v);
    }
    return w.take();
}

TensorFile decode_tensor_file(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    Reader r(bytes, origin);
    if (std::memcmp(r.take(4, "magic"), kMagic, 4) != 0) r.fail("not a TADC file (bad magic)");
    const auto version = r.le<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        r.fail("unsupported format version " + std::to_string(version) + " (expected " +
               std::to_string(kCheckpointVersion) + ")");
    }
    TensorFile file;
    const auto stage = r.le<std::uint8_t>("stage tag");
    if (stage < 1 || stage > 3) r.fail("unknown stage tag " + std::to_string(stage));
    file.stage = static_cast<Stage>(stage);
    file.seed = r.le<std::uint64_t>("seed");
    try {
        file.header = json::parse(r.str("header"));
    } catch (const json::parse_error&) {
        r.fail("malformed JSON header");
    }
    const auto count = r.le<std::uint32_t>("tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str("tensor name");
        if (r.le<std::uint8_t>("dtype") != 0) r.fail("tensor '" + name + "' has an unsupported dtype");
        const auto rank = r.le<std::uint32_t>("rank");
        if (rank == 0 || rank > 8) r.fail("tensor '" + name + "' has invalid rank " + std::to_string(rank));
        Shape shape;
        std::uint64_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const auto dim = r.le<std::uint64_t>("dims");
            if (dim == 0 || total > r.remaining() / dim) r.fail("tensor '" + name + "' has invalid dimensions");
            total *= dim;
            shape.push_back(static_cast<std::size_t>(dim));
        }
        if (total > r.remaining() / 4) r.fail("truncated while reading tensor '" + name + "'");
        std::vector<float> values(static_cast<std::size_t>(total));
        for (float& v : values) v = std::bit_cast<float>(r.le<std::uint32_t>("tensor data"));
        file.tensors.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    if (!r.at_end()) r.fail("unexpected trailing bytes");
    return file;
}

void save_tensor_file(const fs::path& path, const TensorFile& file) { atomic_write(path, encode_tensor_file(file)); }

TensorFile load_tensor_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(path.string() + ": cannot open");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tensor_file(bytes, path.string());
}

void save_checkpoint(const fs::path& path, const Model& model, const CheckpointMeta& meta) {
    if (meta.stage == Stage::Maps) throw CheckpointError(path.string() + ": a model checkpoint needs a stage tag");
    TensorFile file;
    file.stage = meta.stage;
    file.seed = meta.seed;
    file.header = {{"model", to_json(model.config)}, {"pretrained", meta.pretrained}, {"variant", meta.variant}};
    for (const NamedParam& p : model.params.named()) file.tensors.emplace_back(p.name, p.tensor);
    save_tensor_file(path, file);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
    const TensorFile file = load_tensor_file(path);
    const std::string origin = path.string();
    if (file.stage == Stage::Maps) throw CheckpointError(origin + ": holds score maps, not model weights");
    const json& h = file.header;
    if (!h.is_object() || !h.contains("model") || !h.contains("pretrained") || !h["pretrained"].is_boolean() ||
        !h.contains("variant") || !h["variant"].is_string()) {
        throw CheckpointError(origin + ": incomplete checkpoint header");
    }
    LoadedCheckpoint out;
    try {
        out.model = Model::create(parse_model_config(h["model"], "/model"), 0);
    } catch (const ConfigError& e) {
        throw CheckpointError(origin + ": " + e.what());
    }
    out.meta.stage = file.stage;
    out.meta.seed = file.seed;
    out.meta.pretrained = h["pretrained"].get<bool>();
    out.meta.variant = h["variant"].get<std::string>();

    std::vector<NamedParam> params = out.model.params.named();
    if (file.tensors.size() != params.size()) {
        throw CheckpointError(origin + ": holds " + std::to_string(file.tensors.size()) + " tensors, model expects " +
                              std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, t] = file.tensors[i];
        if (name != params[i].name) throw CheckpointError(origin + ": expected tensor '" + params[i].name + "', found '" + name + "'");
        if (t.shape() != params[i].tensor.shape()) {
            throw CheckpointError(origin + ": tensor '" + name + "' has shape " + to_string(t.shape()) + ", model expects " +
                                  to_string(params[i].tensor.shape()));
        }
    }
    // Everything validated; only now touch the model.
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& src = file.tensors[i].second.data();
        std::copy(src.begin(), src.end(), params[i].tensor.mutable_data().begin());
    }
    return out;
}

LoadedCheckpoint load_checkpoint(const fs::path& path, const ModelConfig& expected) {
    LoadedCheckpoint out = load_checkpoint(path);
    if (!(out.model.config == expected)) {
        throw CheckpointError(path.string() + ": model config " + to_json(out.model.config).dump() +
                              " does not match the run config " + to_json(expected).dump());
    }
    return out;
}

void require_pretrained(const CheckpointMeta& meta, const std::string& origin) {
    if (!meta.pretrained) throw CheckpointError(origin + ": weights do not descend from stage-1 pretraining");
}

}  // namespace tadc
