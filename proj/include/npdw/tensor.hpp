#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace npdw::nn {

template <class S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
        v.assign(static_cast<std::size_t>(count(shape)), S(0));
    }
    Tensor(std::vector<int> shp, std::vector<S> data) : shape(std::move(shp)), v(std::move(data)) {
        if (v.size() != static_cast<std::size_t>(count(shape)))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static long count(const std::vector<int>& shp) {
        long n = 1;
        for (int d : shp) n *= d;
        return n;
    }

    long size() const { return static_cast<long>(v.size()); }
    int last_dim() const { return shape.empty() ? 1 : shape.back(); }
    long rows() const { return last_dim() ? size() / last_dim() : 0; }
    S* data() { return v.data(); }
    const S* data() const { return v.data(); }
};

}  // namespace npdw::nn
