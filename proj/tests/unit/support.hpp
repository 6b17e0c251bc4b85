#pragma once

#include "doctest.h"
#include "oracles.hpp"

namespace testing {

template <class T>
double max_abs_diff(const ttt::Tensor<T>& a, const ttt::Tensor<T>& b) {
    REQUIRE(a.values().size() == b.values().size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i])));
    return m;
}

}  // namespace testing
