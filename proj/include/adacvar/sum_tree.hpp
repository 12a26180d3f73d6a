#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace adacvar {

/// Complete binary tree of partial sums over nonnegative item weights.
///
/// Capacity is the next power of two >= N; padding leaves hold zero. Node 1 is
/// the root and the leaves occupy [capacity, 2 * capacity). Sampling and point
/// updates cost O(log N). Concurrent sampling is safe between updates; updates
/// need exclusive access.
class SumTree {
public:
    SumTree() = default;
    /// O(N) build. Throws InvalidInput on negative or non-finite weights.
    explicit SumTree(std::span<const double> weights);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

    double total() const { return nodes_.empty() ? 0.0 : nodes_[1]; }
    double weight(std::size_t i) const;

    /// O(log N) path refresh. Every `kRebuildInterval` updates the whole tree is
    /// re-summed from the leaves so drift in the internal nodes cannot accumulate.
    void update(std::size_t i, double new_weight);

    /// Leaf i with prefix(i-1) <= u * total < prefix(i), for u in [0, 1).
    /// Zero-weight leaves are never returned. Throws EmptyDistribution when total is 0.
    std::size_t sample(double u) const;

    /// Recomputes every internal node from the leaves.
    void rebuild();

    static constexpr std::size_t kRebuildInterval = 1u << 16;

private:
    std::size_t size_ = 0;
    std::size_t capacity_ = 0;
    std::size_t updates_since_rebuild_ = 0;
    std::vector<double> nodes_;
};

}  // namespace adacvar
