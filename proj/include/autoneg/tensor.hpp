#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "autoneg/errors.hpp"

namespace autoneg {

// Dense row-major tensor of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel(shape), 0.0);
    }

    static std::size_t numel(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }

    void check() const {
        if (data.size() != numel(shape)) throw StructuralError("tensor data length != shape");
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

}  // namespace autoneg
