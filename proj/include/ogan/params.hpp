#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "tensor.hpp"

namespace ogan {

/// Named parameter tensors in construction order.
///
/// Iteration order is insertion order, which is what checkpoints rely on.
template <typename T>
class ModelParams {
public:
    using Entry = std::pair<std::string, Tensor<T>>;

    Tensor<T>& add(std::string name, Tensor<T> tensor) {
        if (contains(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
        tensor.set_requires_grad(true);
        entries_.emplace_back(std::move(name), std::move(tensor));
        return entries_.back().second;
    }

    bool contains(const std::string& name) const {
        for (const auto& [n, t] : entries_)
            if (n == name) return true;
        return false;
    }

    const Tensor<T>& at(const std::string& name) const {
        for (const auto& [n, t] : entries_)
            if (n == name) return t;
        throw ArgumentError("unknown parameter '" + name + "'");
    }

    Tensor<T>& at(const std::string& name) {
        return const_cast<Tensor<T>&>(static_cast<const ModelParams&>(*this).at(name));
    }

    std::size_t size() const noexcept { return entries_.size(); }
    const Entry& operator[](std::size_t i) const { return entries_.at(i); }
    Entry& operator[](std::size_t i) { return entries_.at(i); }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    /// Total scalar count across all tensors.
    std::size_t count() const {
        std::size_t total = 0;
        for (const auto& [n, t] : entries_) total += t.numel();
        return total;
    }

    void zero_grad() {
        for (auto& [n, t] : entries_) t.zero_grad();
    }

    /// Overwrites values from `other`, matching by position and name.
    void assign_values(const ModelParams& other) {
        if (other.size() != size()) throw ShapeError("parameter set sizes differ");
        for (std::size_t i = 0; i < size(); ++i) {
            auto& [name, dst] = entries_[i];
            const auto& [oname, src] = other.entries_[i];
            if (name != oname || dst.shape() != src.shape())
                throw ShapeError("parameter mismatch at '" + name + "' " + dst.shape().str() + " vs '" + oname +
                                 "' " + src.shape().str());
            std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
        }
    }

private:
    std::vector<Entry> entries_;
};

}  // namespace ogan
