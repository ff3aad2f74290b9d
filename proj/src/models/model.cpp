#include "tsrisk/models.hpp"

#include "tsrisk/container.hpp"
#include "tsrisk/errors.hpp"
#include "tsrisk/random.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace tsrisk {

namespace {

constexpr const char* kCheckpointKind = "checkpoint";

ParameterStore layout_of(const ModelSpec& spec)
{
    const ModelGraph mg = build_model_graph(spec);
    ParameterStore store;
    for (const ad::ParameterInfo& p : mg.graph.parameters()) {
        store.set(p.name, Tensor(p.shape));
    }
    return store;
}

Tensor sample_as(const Tensor& batch, std::size_t i, std::size_t rows, std::size_t cols)
{
    const auto src = batch.row(i);
    return Tensor({rows, cols}, std::vector<double>(src.begin(), src.end()));
}

// Evaluates `graph_of(lane graph)` for each sample; sample i runs on lane i % lanes.
template <typename Body>
void per_sample(const Model& model, std::size_t count, const std::function<ModelGraph()>& make, Body body)
{
    const std::size_t lanes = std::max<std::size_t>(1, std::min(model.lanes, count));
    std::vector<ModelGraph> graphs;
    graphs.reserve(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        graphs.push_back(make());
        bind_parameters(graphs.back().graph, model.parameters());
    }
    for_each_lane(lanes, [&](std::size_t lane) {
        for (std::size_t i = lane; i < count; i += lanes) {
            body(graphs[lane], i);
        }
    });
}

} // namespace

ModelGraph build_model_graph(const ModelSpec& spec)
{
    spec.validate();
    ModelGraph mg;
    ad::Graph& g = mg.graph;
    const std::size_t n = spec.seq_len();
    switch (spec.family) {
    case ModelFamily::transformer:
        mg.input = g.input("series", n, 1);
        mg.latent = build_transformer_encoder(g, mg.input, spec.transformer);
        mg.output = build_transformer_decoder(g, mg.latent, spec.transformer);
        mg.loss = g.mse(mg.output, mg.input);
        break;
    case ModelFamily::conv:
        mg.input = g.input("series", n, 1);
        mg.output = build_conv_autoencoder(g, mg.input, spec.conv);
        mg.loss = g.mse(mg.output, mg.input);
        break;
    case ModelFamily::ffnn:
        mg.input = g.input("series", 1, n);
        mg.target = g.input("target", 1, 1);
        mg.output = build_ffnn_logit(g, mg.input, spec.ffnn);
        mg.probability = g.sigmoid(mg.output);
        mg.loss = g.bce_with_logits(mg.output, mg.target);
        break;
    }
    return mg;
}

ParameterStore init_parameters(const ModelSpec& spec, std::uint64_t seed)
{
    const ModelGraph mg = build_model_graph(spec);
    std::vector<const ad::ParameterInfo*> infos;
    for (const ad::ParameterInfo& p : mg.graph.parameters()) {
        infos.push_back(&p);
    }
    std::sort(infos.begin(), infos.end(), [](const auto* a, const auto* b) { return a->name < b->name; });

    Rng rng(seed);
    ParameterStore store;
    for (const ad::ParameterInfo* p : infos) {
        Tensor t(p->shape);
        switch (p->init) {
        case ad::Init::zeros: break;
        case ad::Init::ones: t.fill(1.0); break;
        case ad::Init::glorot_uniform: {
            const double limit = std::sqrt(6.0 / static_cast<double>(p->fan_in + p->fan_out));
            for (double& v : t.values()) {
                v = rng.uniform(-limit, limit);
            }
            break;
        }
        }
        store.set(p->name, std::move(t));
    }
    return store;
}

void for_each_lane(std::size_t lanes, const std::function<void(std::size_t)>& body)
{
    const std::size_t workers = std::min<std::size_t>(lanes, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t l = 0; l < lanes; ++l) {
            body(l);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t l = w; l < lanes; l += workers) {
                    body(l);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : threads) {
        t.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

Model::Model(ModelSpec spec, ParameterStore params) : spec_(std::move(spec)), params_(std::move(params))
{
    const LayoutDiff diff = compare_layout(layout_of(spec_), params_);
    if (!diff.empty()) {
        throw DataError("parameters do not fit model '" + spec_.name + "': " + diff.describe());
    }
}

Model Model::initialize(const ModelSpec& spec, std::uint64_t seed)
{
    return Model(spec, init_parameters(spec, seed));
}

void Model::check_batch(const Tensor& batch) const
{
    const std::size_t n = spec_.seq_len();
    const Shape& s = batch.shape();
    const bool ok = (s.size() == 2 && s[1] == n) || (s.size() == 3 && s[1] == n && s[2] == 1);
    if (!ok) {
        throw ShapeError("model '" + spec_.name + "': batch " + shape_string(s) + ", expected [B x " +
                         std::to_string(n) + " x 1]");
    }
}

Tensor Model::encode(const Tensor& batch) const
{
    if (spec_.family != ModelFamily::transformer) {
        throw UsageError("encode: model '" + spec_.name + "' has no latent code");
    }
    check_batch(batch);
    const TransformerSpec& t = spec_.transformer;
    const std::size_t count = batch.rows();
    Tensor out({count, t.latent_dim});
    auto make = [&] {
        ModelGraph mg;
        mg.input = mg.graph.input("series", t.seq_len, 1);
        mg.latent = build_transformer_encoder(mg.graph, mg.input, t);
        return mg;
    };
    per_sample(*this, count, make, [&](ModelGraph& mg, std::size_t i) {
        mg.graph.set_input("series", sample_as(batch, i, t.seq_len, 1));
        mg.graph.forward();
        const auto v = mg.graph.value(mg.latent).values();
        std::copy(v.begin(), v.end(), out.row(i).begin());
    });
    return out;
}

Tensor Model::decode(const Tensor& latents) const
{
    if (spec_.family != ModelFamily::transformer) {
        throw UsageError("decode: model '" + spec_.name + "' has no latent code");
    }
    const TransformerSpec& t = spec_.transformer;
    if (latents.rank() != 2 || latents.cols() != t.latent_dim) {
        throw ShapeError("decode: latents " + shape_string(latents.shape()) + ", expected [B x " +
                         std::to_string(t.latent_dim) + "]");
    }
    const std::size_t count = latents.rows();
    Tensor out({count, t.seq_len, 1});
    per_sample(*this, count, [&] { return build_transformer_decode_graph(t); }, [&](ModelGraph& mg, std::size_t i) {
        mg.graph.set_input("latent", sample_as(latents, i, 1, t.latent_dim));
        mg.graph.forward();
        const auto v = mg.graph.value(mg.output).values();
        std::copy(v.begin(), v.end(), out.row(i).begin());
    });
    return out;
}

Tensor Model::reconstruct(const Tensor& batch) const
{
    if (!spec_.is_autoencoder()) {
        throw UsageError("reconstruct: model '" + spec_.name + "' is not an autoencoder");
    }
    check_batch(batch);
    const std::size_t n = spec_.seq_len();
    const std::size_t count = batch.rows();
    Tensor out({count, n, 1});
    per_sample(*this, count, [&] { return build_model_graph(spec_); }, [&](ModelGraph& mg, std::size_t i) {
        mg.graph.set_input("series", sample_as(batch, i, n, 1));
        mg.graph.forward();
        const auto v = mg.graph.value(mg.output).values();
        std::copy(v.begin(), v.end(), out.row(i).begin());
    });
    return out;
}

std::vector<double> Model::reconstruction_errors(const Tensor& batch) const
{
    const Tensor rec = reconstruct(batch);
    std::vector<double> errors(batch.rows());
    for (std::size_t i = 0; i < errors.size(); ++i) {
        errors[i] = reconstruction_error(batch.row(i), rec.row(i));
    }
    return errors;
}

std::vector<double> Model::scores(const Tensor& batch) const
{
    if (spec_.family != ModelFamily::ffnn) {
        throw UsageError("scores: model '" + spec_.name + "' is not a classifier");
    }
    check_batch(batch);
    const std::size_t n = spec_.seq_len();
    const std::size_t count = batch.rows();
    std::vector<double> out(count);
    auto make = [&] {
        ModelGraph mg;
        mg.input = mg.graph.input("series", 1, n);
        mg.output = build_ffnn_logit(mg.graph, mg.input, spec_.ffnn);
        mg.probability = mg.graph.sigmoid(mg.output);
        return mg;
    };
    per_sample(*this, count, make, [&](ModelGraph& mg, std::size_t i) {
        mg.graph.set_input("series", sample_as(batch, i, 1, n));
        mg.graph.forward();
        out[i] = mg.graph.value(mg.probability)[0];
    });
    return out;
}

std::vector<double> Model::risk_scores(const Tensor& batch) const
{
    return spec_.is_autoencoder() ? reconstruction_errors(batch) : scores(batch);
}

double reconstruction_error(std::span<const double> x, std::span<const double> reconstruction)
{
    if (x.size() != reconstruction.size() || x.empty()) {
        throw ShapeError("reconstruction_error: sizes " + std::to_string(x.size()) + " and " +
                         std::to_string(reconstruction.size()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - reconstruction[i];
        total += d * d;
    }
    return total / static_cast<double>(x.size());
}

double average_reconstruction_error(const Model& model, const Tensor& dataset)
{
    const std::vector<double> errors = model.reconstruction_errors(dataset);
    if (errors.empty()) {
        throw DataError("average_reconstruction_error: empty dataset");
    }
    double total = 0.0;
    for (double e : errors) {
        total += e;
    }
    return total / static_cast<double>(errors.size());
}

Tensor conv_forward(const Model& model, const Tensor& batch)
{
    if (model.spec().family != ModelFamily::conv) {
        throw UsageError("conv_forward: model '" + model.spec().name + "' is not a convolutional autoencoder");
    }
    return model.reconstruct(batch);
}

std::vector<double> ffnn_score(const Model& model, const Tensor& batch)
{
    return model.scores(batch);
}

void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec, const ParameterStore& params)
{
    const LayoutDiff diff = compare_layout(layout_of(spec), params);
    if (!diff.empty()) {
        throw DataError("refusing to save checkpoint: " + diff.describe());
    }
    io::Container c;
    c.kind = kCheckpointKind;
    c.format_version = kCheckpointFormatVersion;
    c.metadata = {{"model", to_json(spec)}};
    for (const auto& [name, tensor] : params) {
        c.tensors.emplace_back(name, tensor);
    }
    io::write_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    io::Container c = io::read_container(path, kCheckpointKind);
    if (c.format_version != kCheckpointFormatVersion) {
        throw FormatError(path.string() + ": unsupported checkpoint format_version " +
                          std::to_string(c.format_version) + " (expected " +
                          std::to_string(kCheckpointFormatVersion) + ")");
    }
    if (!c.metadata.contains("model")) {
        throw FormatError(path.string() + ": checkpoint has no model description");
    }
    Checkpoint cp;
    try {
        cp.spec = model_spec_from_json(c.metadata.at("model"));
    } catch (const UsageError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    for (auto& [name, tensor] : c.tensors) {
        cp.parameters.set(name, std::move(tensor));
    }
    return cp;
}

Model load_model(const std::filesystem::path& path)
{
    Checkpoint cp = load_checkpoint(path);
    return Model(std::move(cp.spec), std::move(cp.parameters));
}

ParameterStore load_checkpoint_for(const std::filesystem::path& path, const ModelSpec& expected)
{
    Checkpoint cp = load_checkpoint(path);
    const LayoutDiff diff = compare_layout(layout_of(expected), cp.parameters);
    if (!diff.empty()) {
        throw DataError(path.string() + ": checkpoint does not fit model '" + expected.name + "': " +
                        diff.describe());
    }
    return std::move(cp.parameters);
}

} // namespace tsrisk
