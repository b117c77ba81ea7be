#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace weakinv {

/// Running max/mean of a residual over a sample set.
struct ResidualStats
{
  double max{0.0};
  double sum{0.0};
  std::size_t count{0};

  void add(double r)
  {
    // NaN must poison the max, std::max would drop it
    if (std::isnan(r) || r > max) { max = r; }
    sum += r;
    ++count;
  }

  void merge(const ResidualStats & other)
  {
    if (std::isnan(other.max) || other.max > max) { max = other.max; }
    sum += other.sum;
    count += other.count;
  }

  [[nodiscard]] double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
  [[nodiscard]] bool below(double tol) const { return !std::isnan(max) && max < tol; }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t & state)
{
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z               = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  z               = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31U);
}

inline std::uint64_t fnv1a(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline double radical_inverse(std::uint64_t index, std::uint64_t base)
{
  double inv_base = 1.0 / static_cast<double>(base);
  double f        = inv_base;
  double result   = 0.0;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f *= inv_base;
  }
  return result;
}

inline constexpr std::array<std::uint64_t, 40> kPrimes{
  2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,  37,  41,  43,  47,  53,  59,  61,  67,  71,
  73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173};

}  // namespace detail

/**
 * @brief Deterministic low-discrepancy sampling over a coordinate box.
 *
 * Each named stream is a Halton sequence with a Cranley-Patterson shift
 * drawn from splitmix64(seed, stream). Distinct stream names give
 * independent-looking point sets; the same (seed, stream) always gives the
 * same points on every platform.
 */
struct SamplingPlan
{
  std::uint64_t seed{0};
  std::size_t group_samples{50};
  std::size_t point_samples{8};
  double box{1.5};  ///< coordinates drawn from [-box, box]

  /// `count` points of dimension `dim` in [-box, box]^dim.
  [[nodiscard]] std::vector<Eigen::VectorXd> coords(std::size_t dim, std::size_t count, std::string_view stream) const
  {
    if (dim > detail::kPrimes.size()) {
      // higher dimensions are served by concatenating independent sub-streams
      std::vector<Eigen::VectorXd> out(count, Eigen::VectorXd(static_cast<Eigen::Index>(dim)));
      std::size_t done = 0;
      int part         = 0;
      while (done < dim) {
        std::size_t chunk = std::min(dim - done, detail::kPrimes.size());
        std::string name  = std::string(stream) + "#" + std::to_string(part++);
        auto sub          = coords(chunk, count, name);
        for (std::size_t i = 0; i < count; ++i) {
          out[i].segment(static_cast<Eigen::Index>(done), static_cast<Eigen::Index>(chunk)) = sub[i];
        }
        done += chunk;
      }
      return out;
    }

    std::uint64_t state = seed ^ detail::fnv1a(stream);
    std::vector<double> shift(dim);
    for (auto & s : shift) { s = static_cast<double>(detail::splitmix64(state) >> 11U) * 0x1.0p-53; }

    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < dim; ++k) {
        double u = detail::radical_inverse(i + 1, detail::kPrimes[k]) + shift[k];
        u -= std::floor(u);
        x(static_cast<Eigen::Index>(k)) = box * (2.0 * u - 1.0);
      }
      out.push_back(std::move(x));
    }
    return out;
  }
};

}  // namespace weakinv
