// SPDX-License-Identifier: Apache-2.0

#include "dropgan/rng.hpp"

#include "dropgan/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace dropgan {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng Rng::stream(std::uint64_t seed, std::uint64_t offset) {
    return Rng(mix_seed(mix_seed(seed) ^ mix_seed(offset + 0x632be59bd9b4e019ULL)));
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw Error("rng: index over an empty range");
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::string Rng::save() const {
    std::ostringstream os;
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << std::bit_cast<std::uint64_t>(spare_);
    return os.str();
}

Rng Rng::restore(const std::string& state) {
    std::istringstream is(state);
    Rng r;
    int spare_flag = 0;
    std::uint64_t spare_bits = 0;
    is >> r.engine_ >> spare_flag >> spare_bits;
    if (!is) throw Error("rng: malformed saved state");
    r.has_spare_ = spare_flag != 0;
    r.spare_ = std::bit_cast<double>(spare_bits);
    return r;
}

bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.has_spare_ == b.has_spare_ &&
           std::bit_cast<std::uint64_t>(a.spare_) == std::bit_cast<std::uint64_t>(b.spare_);
}

}  // namespace dropgan
