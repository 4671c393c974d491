#include "rydspec/peaks.hpp"

#include <algorithm>
#include <cmath>

#include "rydspec/error.hpp"

namespace rydspec {

std::vector<double> moving_average5(std::span<const double> y) {
  const std::size_t n = y.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(n - 1, i + 2);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += y[j];
    out[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double estimate_noise(std::span<const double> y) {
  if (y.size() < 3) return 0.0;
  std::vector<double> d(y.size() - 1);
  for (std::size_t i = 1; i < y.size(); ++i) d[i - 1] = std::abs(y[i] - y[i - 1]);
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  // MAD of a difference of two iid normals: sigma * sqrt(2) * 0.6745.
  return *mid / (0.6744897501960817 * std::sqrt(2.0));
}

namespace {

struct Candidate {
  std::size_t index;
  double prominence;
  std::size_t left_base;
  std::size_t right_base;
};

// Position where y crosses `level` between samples a and b (y[a] >= level > y[b]
// or vice versa), by linear interpolation in energy.
double crossing(std::span<const double> e, std::span<const double> y, std::size_t a, std::size_t b, double level) {
  const double t = (y[a] - level) / (y[a] - y[b]);
  return e[a] + t * (e[b] - e[a]);
}

}  // namespace

std::vector<PeakGuess> detect_peaks(const Spectrum& s, double min_prominence, double min_separation) {
  if (!(min_prominence > 0.0)) throw PreconditionError("min_prominence must be positive");
  const auto e = s.axis().values();
  const auto y = moving_average5(s.counts());
  const std::size_t n = y.size();

  std::vector<Candidate> cands;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    std::size_t l = i;
    double left_min = y[i];
    while (l > 0 && y[l - 1] <= y[i]) {
      --l;
      left_min = std::min(left_min, y[l]);
    }
    std::size_t r = i;
    double right_min = y[i];
    while (r + 1 < n && y[r + 1] <= y[i]) {
      ++r;
      right_min = std::min(right_min, y[r]);
    }
    const double prom = y[i] - std::max(left_min, right_min);
    if (prom >= min_prominence) cands.push_back({i, prom, l, r});
  }

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.prominence != b.prominence ? a.prominence > b.prominence : a.index < b.index;
  });
  std::vector<Candidate> kept;
  for (const auto& c : cands) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](const Candidate& k) {
      return std::abs(e[k.index] - e[c.index]) >= min_separation;
    });
    if (clear) kept.push_back(c);
  }

  std::vector<PeakGuess> out;
  const double step = s.axis().spacing();
  for (const auto& c : kept) {
    const double level = y[c.index] - 0.5 * c.prominence;
    std::optional<double> left;
    for (std::size_t j = c.index; j > c.left_base; --j) {
      if (y[j - 1] < level) {
        left = crossing(e, y, j, j - 1, level);
        break;
      }
      if (y[j - 1] > y[j]) break;  // ran into a neighbouring line
    }
    std::optional<double> right;
    for (std::size_t j = c.index; j < c.right_base; ++j) {
      if (y[j + 1] < level) {
        right = crossing(e, y, j, j + 1, level);
        break;
      }
      if (y[j + 1] > y[j]) break;
    }
    const double center = e[c.index];
    double width;
    if (left && right) {
      width = *right - *left;
    } else if (left) {
      width = 2.0 * (center - *left);
    } else if (right) {
      width = 2.0 * (*right - center);
    } else {
      width = e[c.right_base] - e[c.left_base];
    }
    out.push_back({center, y[c.index], std::max(width, step), c.prominence});
  }
  std::sort(out.begin(), out.end(), [](const PeakGuess& a, const PeakGuess& b) { return a.center < b.center; });
  return out;
}

}  // namespace rydspec
