#include "tsrisk/run_config.hpp"

#include "tsrisk/container.hpp"
#include "tsrisk/errors.hpp"

#include <charconv>
#include <cmath>

namespace tsrisk {

namespace {

void no_seed(const nlohmann::json& section, const char* name)
{
    if (section.is_object() && section.contains("seed")) {
        throw UsageError(std::string(name) + ": set 'seed' at the top level of the config");
    }
}

double parse_real(const std::string& key, const std::string& text)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw UsageError("--" + key + ": expected a number, got '" + text + "'");
    }
    return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text)
{
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw UsageError("--" + key + ": expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

std::optional<std::size_t> parse_window(const nlohmann::json& v)
{
    if (v.is_string()) {
        if (v.get<std::string>() != "full") {
            throw UsageError("model: window must be a positive integer or \"full\"");
        }
        return std::nullopt;
    }
    return v.get<std::size_t>();
}

void parse_model(const nlohmann::json& j, RunConfig& c)
{
    if (!j.is_object()) {
        throw UsageError("model: expected an object");
    }
    ModelOverrides& o = c.overrides;
    for (const auto& item : j.items()) {
        const std::string& key = item.key();
        const nlohmann::json& v = item.value();
        if (key == "name") {
            c.model = v.get<std::string>();
        } else if (key == "window") {
            o.window = parse_window(v);
        } else if (key == "use_layer_norm") {
            o.use_layer_norm = v.get<bool>();
        } else if (key == "positional_encoding") {
            o.positional_encoding = v.get<bool>();
        } else if (key == "encoder_blocks") {
            o.encoder_blocks = v.get<std::size_t>();
        } else if (key == "decoder_blocks") {
            o.decoder_blocks = v.get<std::size_t>();
        } else if (key == "heads") {
            o.heads = v.get<std::size_t>();
        } else if (key == "head_dim") {
            o.head_dim = v.get<std::size_t>();
        } else if (key == "ffn_dim") {
            o.ffn_dim = v.get<std::size_t>();
        } else if (key == "latent_dim") {
            o.latent_dim = v.get<std::size_t>();
        } else if (key == "conv_filters") {
            o.conv_filters = v.get<std::vector<std::size_t>>();
        } else if (key == "conv_kernel") {
            o.conv_kernel = v.get<std::size_t>();
        } else if (key == "hidden") {
            o.hidden = v.get<std::vector<std::size_t>>();
        } else {
            throw UsageError("model: unknown key '" + key + "'");
        }
    }
}

void parse_cluster(const nlohmann::json& j, RunConfig& c)
{
    if (!j.is_object()) {
        throw UsageError("cluster: expected an object");
    }
    for (const auto& item : j.items()) {
        const std::string& key = item.key();
        const nlohmann::json& v = item.value();
        if (key == "fraction") {
            c.cluster_fraction = v.get<double>();
        } else if (key == "consistency_base") {
            const std::string base = v.get<std::string>();
            if (base == "first") {
                c.consistency_base = ConsistencyBase::first;
            } else if (base == "union") {
                c.consistency_base = ConsistencyBase::union_of_all;
            } else {
                throw UsageError("cluster: consistency_base must be \"first\" or \"union\"");
            }
        } else if (key == "threshold") {
            c.cluster_threshold = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        } else {
            throw UsageError("cluster: unknown key '" + key + "'");
        }
    }
}

void parse_representativeness(const nlohmann::json& j, RunConfig& c)
{
    if (!j.is_object()) {
        throw UsageError("representativeness: expected an object");
    }
    for (const auto& item : j.items()) {
        const std::string& key = item.key();
        const nlohmann::json& v = item.value();
        if (key == "threshold") {
            c.representativeness_threshold = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        } else if (key == "subset") {
            c.representativeness_subset =
                SubsetSize::parse(v.is_string() ? v.get<std::string>() : std::to_string(v.get<std::size_t>()));
        } else {
            throw UsageError("representativeness: unknown key '" + key + "'");
        }
    }
}

} // namespace

void RunConfig::resolve()
{
    synth.seed = seed;
    train.seed = seed;
    synth.validate();
    pipeline.validate();
    train.validate();
    model_spec_for(model, pipeline.target_len);
    if (!(cluster_fraction > 0.0 && cluster_fraction < 1.0)) {
        throw UsageError("cluster fraction must lie in (0, 1)");
    }
    if (overrides.window && *overrides.window && **overrides.window == 0) {
        throw UsageError("window must be >= 1 or full");
    }
}

RunConfig run_config_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw UsageError("config: expected a JSON object at the top level");
    }
    RunConfig c;
    try {
        for (const auto& item : j.items()) {
            const std::string& key = item.key();
            const nlohmann::json& v = item.value();
            if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else if (key == "synth") {
                no_seed(v, "synth");
                c.synth = synth_config_from_json(v);
            } else if (key == "pipeline") {
                c.pipeline = pipeline_config_from_json(v);
            } else if (key == "model") {
                parse_model(v, c);
            } else if (key == "train") {
                no_seed(v, "train");
                c.train = train_config_from_json(v);
            } else if (key == "cluster") {
                parse_cluster(v, c);
            } else if (key == "representativeness") {
                parse_representativeness(v, c);
            } else {
                throw UsageError("config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    c.resolve();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const Error& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(path.string() + ": not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

nlohmann::json to_json(const RunConfig& c)
{
    nlohmann::json synth = to_json(c.synth);
    synth.erase("seed");
    nlohmann::json train = to_json(c.train);
    train.erase("seed");

    nlohmann::json model = {{"name", c.model}};
    const ModelOverrides& o = c.overrides;
    if (o.window) {
        model["window"] = *o.window ? nlohmann::json(**o.window) : nlohmann::json("full");
    }
    auto put = [&](const char* key, const auto& field) {
        if (field) {
            model[key] = *field;
        }
    };
    put("use_layer_norm", o.use_layer_norm);
    put("positional_encoding", o.positional_encoding);
    put("encoder_blocks", o.encoder_blocks);
    put("decoder_blocks", o.decoder_blocks);
    put("heads", o.heads);
    put("head_dim", o.head_dim);
    put("ffn_dim", o.ffn_dim);
    put("latent_dim", o.latent_dim);
    put("conv_filters", o.conv_filters);
    put("conv_kernel", o.conv_kernel);
    put("hidden", o.hidden);

    return {
        {"seed", c.seed},
        {"synth", synth},
        {"pipeline", to_json(c.pipeline)},
        {"model", model},
        {"train", train},
        {"cluster",
         {{"fraction", c.cluster_fraction},
          {"consistency_base", c.consistency_base == ConsistencyBase::first ? "first" : "union"},
          {"threshold", c.cluster_threshold ? nlohmann::json(*c.cluster_threshold) : nlohmann::json(nullptr)}}},
        {"representativeness",
         {{"threshold", c.representativeness_threshold ? nlohmann::json(*c.representativeness_threshold)
                                                       : nlohmann::json(nullptr)},
          {"subset", c.representativeness_subset.to_string()}}},
    };
}

void apply_override(RunConfig& c, const std::string& key, const std::string& value)
{
    if (key == "seed") {
        c.seed = parse_count(key, value);
    } else if (key == "model") {
        c.model = value;
    } else if (key == "window") {
        if (value == "full") {
            c.overrides.window = std::optional<std::size_t>{};
        } else {
            const auto w = parse_count(key, value);
            if (w == 0) {
                throw UsageError("--window: expected a positive integer or 'full'");
            }
            c.overrides.window = std::optional<std::size_t>{w};
        }
    } else if (key == "fraction") {
        c.cluster_fraction = parse_real(key, value);
    } else if (key == "epochs") {
        c.train.epochs = parse_count(key, value);
    } else if (key == "batch-size") {
        c.train.batch_size = parse_count(key, value);
    } else if (key == "subset") {
        c.train.subset = SubsetSize::parse(value);
    } else if (key == "strict") {
        c.pipeline.strict = value != "false" && value != "0";
    } else if (key == "threshold") {
        c.representativeness_threshold = parse_real(key, value);
    } else if (key == "represent-subset") {
        c.representativeness_subset = SubsetSize::parse(value);
    } else if (key == "lanes") {
        c.train.lanes = parse_count(key, value);
    } else if (key == "classifier-fraction") {
        c.train.classifier_fraction = parse_real(key, value);
    } else {
        throw UsageError("unknown override '" + key + "'");
    }
    c.resolve();
}

ModelSpec resolve_model_spec(const RunConfig& c, std::size_t seq_len)
{
    ModelSpec spec = model_spec_for(c.model, seq_len);
    const ModelOverrides& o = c.overrides;
    TransformerSpec& t = spec.transformer;
    if (o.window) {
        t.window = *o.window;
    }
    if (o.use_layer_norm) {
        t.use_layer_norm = *o.use_layer_norm;
    }
    if (o.positional_encoding) {
        t.positional_encoding = *o.positional_encoding;
    }
    t.encoder_blocks = o.encoder_blocks.value_or(t.encoder_blocks);
    t.decoder_blocks = o.decoder_blocks.value_or(t.decoder_blocks);
    t.heads = o.heads.value_or(t.heads);
    t.head_dim = o.head_dim.value_or(t.head_dim);
    t.ffn_dim = o.ffn_dim.value_or(t.ffn_dim);
    t.latent_dim = o.latent_dim.value_or(t.latent_dim);
    if (o.conv_filters) {
        spec.conv.encoder_filters = *o.conv_filters;
        spec.conv.decoder_filters.assign(o.conv_filters->rbegin(), o.conv_filters->rend());
    }
    spec.conv.kernel = o.conv_kernel.value_or(spec.conv.kernel);
    if (o.hidden) {
        spec.ffnn.hidden = *o.hidden;
    }
    spec.validate();
    return spec;
}

} // namespace tsrisk
