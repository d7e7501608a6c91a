#include "tadc/config.hpp"

#include <cctype>
#include <concepts>
#include <fstream>
#include <set>

#include "tadc/error.hpp"

namespace tadc {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object and rejects any it did not consume.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    template <std::unsigned_integral T>
    void get(const char* key, T& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
            out = v->get<T>();
        }
    }
    void get(const char* key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(where(key) + ": expected a number");
            out = v->get<double>();
        }
    }
    void get(const char* key, float& out) {
        double d = out;
        get(key, d);
        out = static_cast<float>(d);
    }
    void get(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(where(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void get(const char* key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(where(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }
    /// Parses a string value with `parse`, re-throwing errors with the path.
    template <typename T, typename Parse>
    void get_enum(const char* key, T& out, Parse parse) {
        std::string s;
        if (!find(key)) return;
        get(key, s);
        try {
            out = parse(s);
        } catch (const ConfigError& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }
    const json* sub(const char* key) { return find(key); }
    std::string child(const char* key) const { return path_ + "/" + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(where(key.c_str()) + ": unknown key");
        }
    }

private:
    const json* find(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string where() const { return path_.empty() ? "/" : path_; }
    std::string where(const char* key) const { return path_ + "/" + key; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_adamw(Section& parent, const char* key, AdamWConfig& out) {
    const json* j = parent.sub(key);
    if (!j) return;
    Section s(*j, parent.child(key));
    s.get("beta1", out.beta1);
    s.get("beta2", out.beta2);
    s.get("eps", out.eps);
    s.get("weight_decay", out.weight_decay);
    s.get("clip_norm", out.clip_norm);
    s.finish();
}

json adamw_json(const AdamWConfig& a) {
    return {{"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}, {"weight_decay", a.weight_decay},
            {"clip_norm", a.clip_norm}};
}

void parse_loss(Section& parent, LossConfig& out) {
    const json* j = parent.sub("loss");
    if (!j) return;
    Section s(*j, parent.child("loss"));
    s.get("lambda_mse", out.lambda_mse);
    s.get("lambda_ssim", out.lambda_ssim);
    s.get("lambda_ce", out.lambda_ce);
    s.get("omega", out.omega);
    s.get("ssim_window", out.ssim_window);
    s.get("ssim_sigma", out.ssim_sigma);
    s.get("ssim_k1", out.ssim_k1);
    s.get("ssim_k2", out.ssim_k2);
    s.finish();
}

void parse_corruption(Section& parent, CorruptionConfig& out) {
    const json* j = parent.sub("corruption");
    if (!j) return;
    const std::string path = parent.child("corruption");
    Section s(*j, path);
    s.get("corrupt_probability", out.corrupt_probability);
    s.get("min_blocks", out.min_blocks);
    s.get("max_blocks", out.max_blocks);
    s.get("min_side_fraction", out.min_side_fraction);
    s.get("max_side_fraction", out.max_side_fraction);
    s.get("noise_sigma", out.noise_sigma);
    s.get("min_shift", out.min_shift);
    s.get("max_shift", out.max_shift);
    s.get("multi_op_probability", out.multi_op_probability);
    if (const json* ops = s.sub("ops")) {
        if (!ops->is_array()) throw ConfigError(path + "/ops: expected an array of op names");
        out.ops.clear();
        for (std::size_t i = 0; i < ops->size(); ++i) {
            const json& op = (*ops)[i];
            const std::string at = path + "/ops/" + std::to_string(i);
            if (!op.is_string()) throw ConfigError(at + ": expected a string");
            try {
                out.ops.push_back(parse_corruption_op(op.get<std::string>()));
            } catch (const ConfigError& e) {
                throw ConfigError(at + ": " + e.what());
            }
        }
    }
    s.finish();
}

}  // namespace

json to_json(const ModelConfig& c) {
    return {{"image_size", c.image_size},       {"channels", c.channels},
            {"patch_size", c.patch_size},       {"encoder_dim", c.encoder_dim},
            {"encoder_depth", c.encoder_depth}, {"encoder_heads", c.encoder_heads},
            {"decoder_dim", c.decoder_dim},     {"decoder_depth", c.decoder_depth},
            {"decoder_heads", c.decoder_heads}, {"mlp_ratio", c.mlp_ratio},
            {"mask_ratio", c.mask_ratio}};
}

ModelConfig parse_model_config(const json& doc, const std::string& path) {
    ModelConfig c;
    Section s(doc, path);
    s.get("image_size", c.image_size);
    s.get("channels", c.channels);
    s.get("patch_size", c.patch_size);
    s.get("encoder_dim", c.encoder_dim);
    s.get("encoder_depth", c.encoder_depth);
    s.get("encoder_heads", c.encoder_heads);
    s.get("decoder_dim", c.decoder_dim);
    s.get("decoder_depth", c.decoder_depth);
    s.get("decoder_heads", c.decoder_heads);
    s.get("mlp_ratio", c.mlp_ratio);
    s.get("mask_ratio", c.mask_ratio);
    s.finish();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError((path.empty() ? "/" : path) + ": " + e.what());
    }
    return c;
}

RunConfig parse_run_config(const json& doc) {
    RunConfig rc;
    Section root(doc, "");
    root.get("seed", rc.seed);
    if (const json* m = root.sub("model")) rc.model = parse_model_config(*m, "/model");

    if (const json* p = root.sub("pretrain")) {
        Section s(*p, "/pretrain");
        s.get("epochs", rc.pretrain.epochs);
        s.get("batch_size", rc.pretrain.batch_size);
        s.get("lr_base", rc.pretrain.lr_base);
        s.get("min_lr", rc.pretrain.min_lr);
        s.get("warmup_fraction", rc.pretrain.warmup_fraction);
        double mask_ratio = rc.model.mask_ratio;
        s.get("mask_ratio", mask_ratio);
        if (p->contains("mask_ratio")) {
            if (doc.contains("model") && doc["model"].contains("mask_ratio") && mask_ratio != rc.model.mask_ratio) {
                throw ConfigError("/pretrain/mask_ratio: conflicts with /model/mask_ratio");
            }
            rc.model.mask_ratio = mask_ratio;
        }
        parse_adamw(s, "adamw", rc.pretrain.adamw);
        s.finish();
    }

    if (const json* p = root.sub("stage2")) {
        Section s(*p, "/stage2");
        Stage2Config& st = rc.stage2;
        s.get("epochs", st.epochs);
        s.get("batch_size", st.batch_size);
        s.get("max_lr", st.max_lr);
        s.get("min_lr", st.min_lr);
        s.get("period_epochs", st.period_epochs);
        s.get_enum("input_mode", st.input_mode, parse_input_mode);
        s.get("train_encoder", st.train_encoder);
        parse_adamw(s, "adamw", st.adamw);
        parse_loss(s, st.loss);
        parse_corruption(s, st.corruption);
        s.finish();
    }

    if (const json* p = root.sub("eval")) {
        Section s(*p, "/eval");
        s.get_enum("pooling", rc.eval.pooling, parse_pooling);
        s.get("smooth_sigma", rc.eval.smooth_sigma);
        s.get("normalize_per_image", rc.eval.normalize_per_image);
        s.get("mask_draws", rc.eval.mask_draws);
        s.finish();
    }
    root.finish();
    validate(rc);
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string() + ": cannot open config");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        return parse_run_config(doc);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json to_json(const RunConfig& rc) {
    const Stage2Config& st = rc.stage2;
    json ops = json::array();
    for (CorruptionOp op : st.corruption.ops) ops.push_back(to_string(op));
    return {
        {"seed", rc.seed},
        {"model", to_json(rc.model)},
        {"pretrain",
         {{"epochs", rc.pretrain.epochs},
          {"batch_size", rc.pretrain.batch_size},
          {"lr_base", rc.pretrain.lr_base},
          {"min_lr", rc.pretrain.min_lr},
          {"warmup_fraction", rc.pretrain.warmup_fraction},
          {"adamw", adamw_json(rc.pretrain.adamw)}}},
        {"stage2",
         {{"epochs", st.epochs},
          {"batch_size", st.batch_size},
          {"max_lr", st.max_lr},
          {"min_lr", st.min_lr},
          {"period_epochs", st.period_epochs},
          {"input_mode", to_string(st.input_mode)},
          {"train_encoder", st.train_encoder},
          {"adamw", adamw_json(st.adamw)},
          {"loss",
           {{"lambda_mse", st.loss.lambda_mse},
            {"lambda_ssim", st.loss.lambda_ssim},
            {"lambda_ce", st.loss.lambda_ce},
            {"omega", st.loss.omega},
            {"ssim_window", st.loss.ssim_window},
            {"ssim_sigma", st.loss.ssim_sigma},
            {"ssim_k1", st.loss.ssim_k1},
            {"ssim_k2", st.loss.ssim_k2}}},
          {"corruption",
           {{"corrupt_probability", st.corruption.corrupt_probability},
            {"min_blocks", st.corruption.min_blocks},
            {"max_blocks", st.corruption.max_blocks},
            {"min_side_fraction", st.corruption.min_side_fraction},
            {"max_side_fraction", st.corruption.max_side_fraction},
            {"ops", ops},
            {"noise_sigma", st.corruption.noise_sigma},
            {"min_shift", st.corruption.min_shift},
            {"max_shift", st.corruption.max_shift},
            {"multi_op_probability", st.corruption.multi_op_probability}}}}},
        {"eval",
         {{"pooling", to_string(rc.eval.pooling)},
          {"smooth_sigma", rc.eval.smooth_sigma},
          {"normalize_per_image", rc.eval.normalize_per_image},
          {"mask_draws", rc.eval.mask_draws}}},
    };
}

void validate(const RunConfig& rc) {
    auto at = [](const std::string& path, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            throw ConfigError(path + ": " + e.what());
        }
    };
    at("/model", [&] { rc.model.validate(); });
    if (rc.pretrain.batch_size == 0) throw ConfigError("/pretrain/batch_size: must be positive");
    if (!(rc.pretrain.warmup_fraction >= 0.0 && rc.pretrain.warmup_fraction < 1.0)) {
        throw ConfigError("/pretrain/warmup_fraction: must lie in [0,1)");
    }
    if (rc.pretrain.lr_base < 0.0 || rc.pretrain.min_lr < 0.0) throw ConfigError("/pretrain: learning rates must be non-negative");
    if (rc.stage2.batch_size == 0) throw ConfigError("/stage2/batch_size: must be positive");
    if (rc.stage2.max_lr < rc.stage2.min_lr || rc.stage2.min_lr < 0.0) {
        throw ConfigError("/stage2: need 0 <= min_lr <= max_lr");
    }
    if (!(rc.stage2.period_epochs > 0.0)) throw ConfigError("/stage2/period_epochs: must be positive");
    at("/stage2/loss", [&] { rc.stage2.loss.validate(rc.model.image_size); });
    at("/stage2/corruption", [&] { rc.stage2.corruption.validate(); });
    if (rc.eval.mask_draws == 0) throw ConfigError("/eval/mask_draws: must be positive");
    if (rc.eval.smooth_sigma < 0.0) throw ConfigError("/eval/smooth_sigma: must be non-negative");
}

namespace {

const char* const kVariantNames[] = {"I", "II", "III", "IV", "V", "VI", "VII", "VIII", "OURS"};

}  // namespace

std::string to_string(VariantId id) { return kVariantNames[static_cast<int>(id)]; }

VariantId parse_variant(const std::string& name) {
    std::string upper = name;
    for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (int i = 0; i < 9; ++i) {
        if (upper == kVariantNames[i]) return static_cast<VariantId>(i);
    }
    throw ConfigError("unknown variant '" + name + "' (expected I..VIII or OURS)");
}

const std::vector<AblationVariant>& variant_table() {
    using enum VariantId;
    constexpr auto C = InputMode::Corrupted;
    static const std::vector<AblationVariant> table{
        // id    pretrain stage2 input               mse    ssim   ce     score
        {I, true, false, InputMode::Clean, false, false, false, ScoreMode::MaskedE},
        {II, false, true, InputMode::Clean, true, true, false, ScoreMode::EOnly},
        {III, false, true, C, true, true, false, ScoreMode::EOnly},
        {IV, false, true, C, false, false, true, ScoreMode::POnly},
        {V, false, true, C, true, true, true, ScoreMode::Fusion},
        {VI, true, true, InputMode::Clean, true, true, false, ScoreMode::EOnly},
        {VII, true, true, C, true, true, false, ScoreMode::EOnly},
        {VIII, true, true, C, false, false, true, ScoreMode::POnly},
        {Ours, true, true, C, true, true, true, ScoreMode::Fusion},
    };
    return table;
}

const AblationVariant& variant(VariantId id) { return variant_table()[static_cast<std::size_t>(id)]; }

void check_variant(const AblationVariant& v) {
    const std::string name = "variant " + to_string(v.id);
    const bool recon = v.use_mse || v.use_ssim;
    if (!v.stage2) {
        if (!v.pretrain || v.score_mode != ScoreMode::MaskedE) {
            throw ConfigError(name + ": without stage 2 only masked scoring of stage-1 weights is defined");
        }
        return;
    }
    if (!recon && !v.use_ce) throw ConfigError(name + ": no active loss");
    if (v.use_ce && v.input_mode == InputMode::Clean) {
        throw ConfigError(name + ": pixel classification needs corrupted inputs");
    }
    switch (v.score_mode) {
        case ScoreMode::EOnly:
            if (!recon) throw ConfigError(name + ": E scoring needs a reconstruction loss");
            break;
        case ScoreMode::POnly:
            if (!v.use_ce) throw ConfigError(name + ": P scoring needs the classification loss");
            break;
        case ScoreMode::Fusion:
            if (!recon || !v.use_ce) throw ConfigError(name + ": fusion needs both heads trained");
            break;
        case ScoreMode::MaskedE:
            throw ConfigError(name + ": masked scoring applies to stage-1 weights only");
    }
}

Stage2Config stage2_for_variant(const Stage2Config& base, const AblationVariant& v) {
    check_variant(v);
    Stage2Config c = base;
    c.input_mode = v.input_mode;
    c.train_encoder = !v.pretrain;
    if (!v.use_mse) c.loss.lambda_mse = 0.0;
    if (!v.use_ssim) c.loss.lambda_ssim = 0.0;
    if (!v.use_ce) c.loss.lambda_ce = 0.0;
    return c;
}

ScoreOptions score_options_for_variant(const EvalConfig& eval, const AblationVariant& v, std::uint64_t seed) {
    ScoreOptions o;
    o.mode = v.score_mode;
    o.pooling = eval.pooling;
    o.smooth_sigma = eval.smooth_sigma;
    o.normalize_per_image = eval.normalize_per_image;
    o.mask_draws = eval.mask_draws;
    o.seed = derive_seed(seed, 0x5C0E);
    return o;
}

}  // namespace tadc
