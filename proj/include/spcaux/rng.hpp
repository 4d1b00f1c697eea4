#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace spcaux {

namespace detail {

// Philox4x64-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// A keyed bijection of a 256-bit counter; same algorithm and constants as
// numpy.random.Philox, against which the known-answer tests were generated.
inline constexpr std::uint64_t philox_m0 = 0xD2E7470EE14C6C93ULL;
inline constexpr std::uint64_t philox_m1 = 0xCA5A826395121157ULL;
inline constexpr std::uint64_t philox_w0 = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t philox_w1 = 0xBB67AE8584CAA73BULL;

inline void philox_round(std::array<std::uint64_t, 4>& c,
                         const std::array<std::uint64_t, 2>& k) noexcept {
    const unsigned __int128 p0 = static_cast<unsigned __int128>(philox_m0) * c[0];
    const unsigned __int128 p1 = static_cast<unsigned __int128>(philox_m1) * c[2];
    const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
    const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
    const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
    const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline std::array<std::uint64_t, 4>
philox4x64_10(std::array<std::uint64_t, 4> counter,
              std::array<std::uint64_t, 2> key) noexcept {
    for (int round = 0; round < 9; ++round) {
        philox_round(counter, key);
        key[0] += philox_w0;
        key[1] += philox_w1;
    }
    philox_round(counter, key);
    return counter;
}

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// 256-layer ziggurat for the standard normal.  The layer edges are solved at
// startup from the equal-area recursion instead of tabulated constants; the
// closure on the tail cut r is bisected to full double precision (the result
// reproduces the published 3.654152885361009 for 256 layers).
struct ziggurat_table {
    static constexpr int layers = 256;
    struct layer {
        double width_scaled; // x_i * 2^-55, premultiplied for the 55-bit uniform
        double x_next;       // x_{i+1}, fast-accept bound
        double f;            // exp(-x_i^2/2)
        double f_next;       // exp(-x_{i+1}^2/2)
    };
    std::array<layer, layers> box{};
    double r = 0.0;

    ziggurat_table() {
        auto density = [](double t) { return std::exp(-0.5 * t * t); };
        auto tail_area = [](double t) {
            return std::sqrt(std::atan(1.0) * 2.0) * std::erfc(t / std::sqrt(2.0));
        };
        // residual > 0 when the stacked boxes overshoot the density at x = 0;
        // the recursion walks x_2..x_255 and the residual is f_256 - 1
        auto closure_residual = [&](double rr) {
            const double v = rr * density(rr) + tail_area(rr);
            double xi = rr;
            double fi = density(rr);
            for (int i = 1; i < layers - 1; ++i) {
                const double fnext = fi + v / xi;
                if (fnext >= 1.0)
                    return fnext - 1.0 + static_cast<double>(layers - 1 - i);
                xi = std::sqrt(-2.0 * std::log(fnext));
                fi = fnext;
            }
            return fi + v / xi - 1.0;
        };
        double lo = 3.0, hi = 4.0;
        for (int it = 0; it < 120; ++it) {
            const double mid = 0.5 * (lo + hi);
            (closure_residual(mid) > 0.0 ? lo : hi) = mid;
        }
        r = 0.5 * (lo + hi);
        const double v = r * density(r) + tail_area(r);

        std::array<double, layers + 1> x{};
        std::array<double, layers + 1> f{};
        x[1] = r;
        f[1] = density(r);
        for (int i = 1; i < layers; ++i) {
            f[i + 1] = f[i] + v / x[i];
            x[i + 1] = (i + 1 == layers) ? 0.0
                                         : std::sqrt(-2.0 * std::log(f[i + 1]));
        }
        f[layers] = 1.0;

        // box[0] is the base layer: rectangle [0, r] x [0, f(r)] plus the tail
        box[0] = {(v / f[1]) * 0x1.0p-55, r, 0.0, f[1]};
        for (int i = 1; i < layers; ++i)
            box[i] = {x[i] * 0x1.0p-55, x[i + 1], f[i], f[i + 1]};
    }
};

inline const ziggurat_table zig_table{};

} // namespace detail

/// Counter-based pseudo-random stream (Philox4x64-10).
///
/// Streams form a tree: child(i) occupies a distinct slice of the 256-bit
/// counter space (one counter word per tree level), so the sequences of
/// distinct streams never overlap by construction.  The same seed always
/// reproduces the same draw sequence bit for bit.  Instances are cheap value
/// types; they are single-owner and not synchronised -- give each parallel
/// task its own child.
class RngStream {
public:
    static constexpr int max_depth = 3;

    explicit RngStream(std::uint64_t seed) {
        std::uint64_t s = seed;
        key_[0] = detail::splitmix64(s);
        key_[1] = detail::splitmix64(s);
    }

    /// Derive the statistically independent child stream with the given index.
    [[nodiscard]] RngStream child(std::uint64_t index) const {
        if (depth_ >= max_depth)
            throw std::logic_error("RngStream: child depth exhausted");
        if (index == UINT64_MAX)
            throw std::invalid_argument("RngStream: child index overflow");
        RngStream c(key_);
        c.path_ = path_;
        c.path_[depth_] = index + 1; // 0 marks an unused level
        c.depth_ = depth_ + 1;
        return c;
    }

    std::uint64_t next_u64() {
        if (buf_pos_ == 4) {
            buf_ = detail::philox4x64_10({block_, path_[0], path_[1], path_[2]},
                                         key_);
            ++block_;
            buf_pos_ = 0;
        }
        return buf_[buf_pos_++];
    }

    /// Uniform double in [0, 1), 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal deviate (ziggurat; exact method, not an approximation).
    double normal() {
        for (;;) {
            const std::uint64_t bits = next_u64();
            const auto& b = detail::zig_table.box[bits & 0xFF];
            const double z =
                static_cast<double>(bits >> 9) * b.width_scaled;
            const double signed_z = (bits & 0x100) ? -z : z;
            if (z < b.x_next) [[likely]]
                return signed_z;
            if ((bits & 0xFF) == 0)
                return (bits & 0x100) ? -tail_deviate() : tail_deviate();
            const double y = b.f + uniform01() * (b.f_next - b.f);
            if (y < std::exp(-0.5 * z * z))
                return signed_z;
        }
    }

    /// Box-Muller pair; independent reference path used by the sampler tests.
    std::pair<double, double> normal_pair_box_muller() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

private:
    explicit RngStream(const std::array<std::uint64_t, 2>& key) : key_(key) {}

    double tail_deviate() {
        // Marsaglia tail method beyond x = r
        const double r = detail::zig_table.r;
        for (;;) {
            const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
            const double u2 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
            const double ex = -std::log(u1) / r;
            const double ey = -std::log(u2);
            if (2.0 * ey > ex * ex)
                return r + ex;
        }
    }

    std::array<std::uint64_t, 2> key_{};
    std::array<std::uint64_t, 3> path_{};
    int depth_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 4> buf_{};
    int buf_pos_ = 4;
};

} // namespace spcaux
