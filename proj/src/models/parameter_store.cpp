#include "tsrisk/parameter_store.hpp"

#include "tsrisk/errors.hpp"
#include "tsrisk/graph.hpp"

namespace tsrisk {

const Tensor& ParameterStore::at(const std::string& name) const
{
    const auto it = tensors_.find(name);
    if (it == tensors_.end()) {
        throw DataError("missing parameter '" + name + "'");
    }
    return it->second;
}

Tensor& ParameterStore::at(const std::string& name)
{
    const auto it = tensors_.find(name);
    if (it == tensors_.end()) {
        throw DataError("missing parameter '" + name + "'");
    }
    return it->second;
}

void ParameterStore::set(const std::string& name, Tensor value)
{
    tensors_[name] = std::move(value);
}

std::size_t ParameterStore::scalar_count() const
{
    std::size_t n = 0;
    for (const auto& [name, t] : tensors_) {
        n += t.size();
    }
    return n;
}

std::vector<std::string> ParameterStore::names() const
{
    std::vector<std::string> out;
    out.reserve(tensors_.size());
    for (const auto& [name, t] : tensors_) {
        out.push_back(name);
    }
    return out;
}

ParameterStore ParameterStore::zeros_like() const
{
    ParameterStore out;
    for (const auto& [name, t] : tensors_) {
        out.set(name, Tensor(t.shape()));
    }
    return out;
}

void ParameterStore::fill(double value)
{
    for (auto& [name, t] : tensors_) {
        t.fill(value);
    }
}

void ParameterStore::add_scaled(const ParameterStore& other, double factor)
{
    for (auto& [name, t] : tensors_) {
        const Tensor& o = other.at(name);
        if (o.shape() != t.shape()) {
            throw ShapeError("add_scaled: shape mismatch for '" + name + "'");
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] += factor * o[i];
        }
    }
}

bool bitwise_equal(const ParameterStore& a, const ParameterStore& b)
{
    if (a.size() != b.size()) {
        return false;
    }
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first || !bitwise_equal(ia->second, ib->second)) {
            return false;
        }
    }
    return true;
}

void bind_parameters(ad::Graph& graph, const ParameterStore& store)
{
    std::string problems;
    for (const ad::ParameterInfo& p : graph.parameters()) {
        if (!store.contains(p.name)) {
            problems += " missing '" + p.name + "';";
            continue;
        }
        const Tensor& t = store.at(p.name);
        if (t.shape() != p.shape) {
            problems += " '" + p.name + "' has shape " + shape_string(t.shape()) + ", expected " +
                        shape_string(p.shape) + ";";
            continue;
        }
        graph.set_parameter(p.name, t);
    }
    if (!problems.empty()) {
        throw DataError("parameter store does not match model:" + problems);
    }
}

void accumulate_gradients(const ad::Graph& graph, ParameterStore& grads)
{
    for (const ad::ParameterInfo& p : graph.parameters()) {
        Tensor& acc = grads.at(p.name);
        const Tensor& g = graph.grad(p.node);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] += g[i];
        }
    }
}

std::string LayoutDiff::describe() const
{
    std::string out;
    auto list = [&out](const char* label, const std::vector<std::string>& names) {
        if (names.empty()) {
            return;
        }
        out += out.empty() ? "" : "; ";
        out += label;
        for (std::size_t i = 0; i < names.size(); ++i) {
            out += (i ? ", " : " ") + names[i];
        }
    };
    list("missing parameters:", missing);
    list("extra parameters:", extra);
    list("shape mismatch:", reshaped);
    return out;
}

LayoutDiff compare_layout(const ParameterStore& expected, const ParameterStore& actual)
{
    LayoutDiff diff;
    for (const auto& [name, t] : expected) {
        if (!actual.contains(name)) {
            diff.missing.push_back(name);
        } else if (actual.at(name).shape() != t.shape()) {
            diff.reshaped.push_back(name);
        }
    }
    for (const auto& [name, t] : actual) {
        if (!expected.contains(name)) {
            diff.extra.push_back(name);
        }
    }
    return diff;
}

} // namespace tsrisk
