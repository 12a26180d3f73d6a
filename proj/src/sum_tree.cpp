#include "adacvar/sum_tree.hpp"

#include <cmath>
#include <string>

#include "adacvar/error.hpp"

namespace adacvar {

namespace {

void check_weight(double w) {
    if (!(w >= 0.0) || !std::isfinite(w))
        throw InvalidInput("sum-tree weights must be finite and nonnegative");
}

}  // namespace

SumTree::SumTree(std::span<const double> weights) : size_(weights.size()) {
    capacity_ = 1;
    while (capacity_ < size_) capacity_ <<= 1;
    nodes_.assign(2 * capacity_, 0.0);
    for (std::size_t i = 0; i < size_; ++i) {
        check_weight(weights[i]);
        nodes_[capacity_ + i] = weights[i];
    }
    rebuild();
}

void SumTree::rebuild() {
    for (std::size_t node = capacity_ - 1; node >= 1; --node)
        nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
    updates_since_rebuild_ = 0;
}

double SumTree::weight(std::size_t i) const {
    if (i >= size_) throw InvalidInput("sum-tree index " + std::to_string(i) + " out of range");
    return nodes_[capacity_ + i];
}

void SumTree::update(std::size_t i, double new_weight) {
    if (i >= size_) throw InvalidInput("sum-tree index " + std::to_string(i) + " out of range");
    check_weight(new_weight);
    std::size_t node = capacity_ + i;
    nodes_[node] = new_weight;
    if (++updates_since_rebuild_ >= kRebuildInterval) {
        rebuild();
        return;
    }
    for (node >>= 1; node >= 1; node >>= 1) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
}

std::size_t SumTree::sample(double u) const {
    if (!(total() > 0.0)) throw EmptyDistribution("cannot sample from a zero-total sum tree");
    if (!(u >= 0.0 && u < 1.0)) throw InvalidInput("sample point must lie in [0, 1)");
    double target = u * total();
    std::size_t node = 1;
    while (node < capacity_) {
        const double left = nodes_[2 * node];
        const double right = nodes_[2 * node + 1];
        if (target < left || right <= 0.0) {
            node = 2 * node;
        } else {
            target -= left;
            node = 2 * node + 1;
        }
    }
    std::size_t leaf = node - capacity_;
    // Rounding can in principle land on a zero leaf at the end of the range;
    // step back to the nearest supported item.
    while (nodes_[capacity_ + leaf] <= 0.0 && leaf > 0) --leaf;
    return leaf;
}

}  // namespace adacvar
