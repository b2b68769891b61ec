#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hive/geometry.hpp"

namespace hive {

/// Uniform bucket grid over the map in compressed-row layout. Rebuilt from
/// scratch; entries are caller-defined integer keys.
class SpatialHash {
public:
    SpatialHash() = default;
    SpatialHash(double world_w, double world_h, double cell)
        : cell_(cell),
          cols_(std::max(1, static_cast<int>(std::ceil(world_w / cell)) + 1)),
          rows_(std::max(1, static_cast<int>(std::ceil(world_h / cell)) + 1)),
          offsets_(static_cast<std::size_t>(cols_) * rows_ + 1, 0) {}

    template <class PosFn>
    void rebuild(std::span<const int> keys, PosFn&& pos_of) {
        std::fill(offsets_.begin(), offsets_.end(), 0);
        bucket_of_.resize(keys.size());
        for (std::size_t i = 0; i < keys.size(); ++i) {
            bucket_of_[i] = bucket(pos_of(keys[i]));
            ++offsets_[bucket_of_[i] + 1];
        }
        for (std::size_t b = 1; b < offsets_.size(); ++b) offsets_[b] += offsets_[b - 1];
        entries_.resize(keys.size());
        std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            entries_[fill[bucket_of_[i]]++] = keys[i];
        }
    }

    /// Calls fn(key) for every entry in buckets overlapping the square
    /// [p - radius, p + radius]. Order is deterministic (bucket row-major,
    /// insertion order within a bucket).
    template <class Fn>
    void for_each_near(Vec2 p, double radius, Fn&& fn) const {
        const int x0 = clamp_col(static_cast<int>(std::floor((p.x - radius) / cell_)));
        const int x1 = clamp_col(static_cast<int>(std::floor((p.x + radius) / cell_)));
        const int y0 = clamp_row(static_cast<int>(std::floor((p.y - radius) / cell_)));
        const int y1 = clamp_row(static_cast<int>(std::floor((p.y + radius) / cell_)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const std::size_t b = static_cast<std::size_t>(y) * cols_ + x;
                for (int i = offsets_[b]; i < offsets_[b + 1]; ++i) fn(entries_[i]);
            }
        }
    }

private:
    int clamp_col(int c) const { return std::clamp(c, 0, cols_ - 1); }
    int clamp_row(int r) const { return std::clamp(r, 0, rows_ - 1); }
    std::size_t bucket(Vec2 p) const {
        const int x = clamp_col(static_cast<int>(std::floor(p.x / cell_)));
        const int y = clamp_row(static_cast<int>(std::floor(p.y / cell_)));
        return static_cast<std::size_t>(y) * cols_ + x;
    }

    double cell_ = 1.0;
    int cols_ = 1;
    int rows_ = 1;
    std::vector<int> offsets_{0, 0};
    std::vector<int> entries_;
    std::vector<std::size_t> bucket_of_;
};

}  // namespace hive
