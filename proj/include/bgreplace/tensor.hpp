#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bgreplace/error.hpp"

namespace bgreplace {

/// Dense frames x height x width x channels extent, row-major with channels innermost.
struct Shape4 {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t size() const { return frames * height * width * channels; }
    std::size_t frame_size() const { return height * width * channels; }

    friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& shape);

template <typename T>
class Array4 {
public:
    using value_type = T;

    Array4() = default;

    explicit Array4(Shape4 shape, T fill = T{})
        : m_shape(shape), m_data(shape.size(), fill) {}

    Array4(Shape4 shape, std::vector<T> data)
        : m_shape(shape), m_data(std::move(data)) {
        if (m_data.size() != m_shape.size()) {
            throw_invalid("Array4: data length " + std::to_string(m_data.size()) +
                          " does not match shape " + to_string(m_shape));
        }
    }

    const Shape4& shape() const { return m_shape; }
    std::size_t size() const { return m_data.size(); }

    std::span<T> data() { return m_data; }
    std::span<const T> data() const { return m_data; }
    const std::vector<T>& vector() const { return m_data; }

    std::size_t index(std::size_t f, std::size_t y, std::size_t x, std::size_t c) const {
        return ((f * m_shape.height + y) * m_shape.width + x) * m_shape.channels + c;
    }

    T& at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) {
        return m_data[index(f, y, x, c)];
    }
    const T& at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) const {
        return m_data[index(f, y, x, c)];
    }

    T& operator[](std::size_t i) { return m_data[i]; }
    const T& operator[](std::size_t i) const { return m_data[i]; }

    std::span<T> frame(std::size_t f) {
        return std::span<T>(m_data).subspan(f * m_shape.frame_size(), m_shape.frame_size());
    }
    std::span<const T> frame(std::size_t f) const {
        return std::span<const T>(m_data).subspan(f * m_shape.frame_size(), m_shape.frame_size());
    }

    template <typename U>
    Array4<U> cast() const {
        std::vector<U> out(m_data.size());
        for (std::size_t i = 0; i < m_data.size(); ++i) {
            out[i] = static_cast<U>(m_data[i]);
        }
        return Array4<U>(m_shape, std::move(out));
    }

private:
    Shape4 m_shape;
    std::vector<T> m_data;
};

template <typename A, typename B>
void require_same_shape(const Array4<A>& a, const Array4<B>& b, const char* what) {
    if (!(a.shape() == b.shape())) {
        throw_invalid(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                      to_string(b.shape()));
    }
}

/// Maximum absolute elementwise difference; shapes must agree.
template <typename A, typename B>
double max_abs_diff(const Array4<A>& a, const Array4<B>& b) {
    require_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        if (d < 0) d = -d;
        if (d > worst) worst = d;
    }
    return worst;
}

}  // namespace bgreplace
