#pragma once

#include "tsrisk/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tsrisk {

namespace ad {
class Graph;
}

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Named weight arrays, iterated in name order.
class ParameterStore {
public:
    using Map = std::map<std::string, Tensor>;

    bool contains(const std::string& name) const { return tensors_.contains(name); }
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    void set(const std::string& name, Tensor value);

    std::size_t size() const { return tensors_.size(); }
    std::size_t scalar_count() const;
    std::vector<std::string> names() const;

    Map::const_iterator begin() const { return tensors_.begin(); }
    Map::const_iterator end() const { return tensors_.end(); }
    Map::iterator begin() { return tensors_.begin(); }
    Map::iterator end() { return tensors_.end(); }

    // Same names, same shapes, all zeros.
    ParameterStore zeros_like() const;
    void fill(double value);
    // this += factor * other (same layout required)
    void add_scaled(const ParameterStore& other, double factor);

private:
    Map tensors_;
};

bool bitwise_equal(const ParameterStore& a, const ParameterStore& b);

/// Copies every parameter of `graph` from `store`. Throws DataError naming
/// missing entries and mismatched shapes.
void bind_parameters(ad::Graph& graph, const ParameterStore& store);

/// Adds the gradient of every graph parameter into `grads`.
void accumulate_gradients(const ad::Graph& graph, ParameterStore& grads);

/// Parameter names present on one side only, or with differing shapes.
struct LayoutDiff {
    std::vector<std::string> missing;
    std::vector<std::string> extra;
    std::vector<std::string> reshaped;
    bool empty() const { return missing.empty() && extra.empty() && reshaped.empty(); }
    std::string describe() const;
};
LayoutDiff compare_layout(const ParameterStore& expected, const ParameterStore& actual);

} // namespace tsrisk
