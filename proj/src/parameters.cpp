#include "rydspec/parameters.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rydspec/constants.hpp"
#include "rydspec/error.hpp"

namespace rydspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTiny = std::numeric_limits<double>::min();
constexpr double kMinWidth = 1e-9;  // eV

// Tagged lines are named by n, untagged ones by their order among the untagged.
std::string fano_prefix(const FanoLine& line, std::size_t& untagged) {
  return line.n ? fmt::format("fano{}", *line.n) : fmt::format("extra{}", untagged++);
}

}  // namespace

ParameterLayout::ParameterLayout(CompositeModel shape) : shape_(std::move(shape)) {
  shape_.validate_structure();
  auto add = [this](std::string name, ParamKind kind, Bound b, std::optional<std::size_t> partner = std::nullopt) {
    info_.push_back({std::move(name), kind, b, partner});
  };
  std::size_t untagged = 0;
  for (std::size_t k = 0; k < shape_.fano_lines.size(); ++k) {
    const auto prefix = fano_prefix(shape_.fano_lines[k], untagged);
    const std::size_t base = info_.size();
    add(prefix + ".E", ParamKind::center, {}, base + 1);
    add(prefix + ".Gamma", ParamKind::width, {kMinWidth, kInf});
    add(prefix + ".f", ParamKind::scale, {kTiny, kInf});
    add(prefix + ".q", ParamKind::asymmetry, {});
  }
  for (std::size_t k = 0; k < shape_.lorentz_lines.size(); ++k) {
    const auto prefix = fmt::format("lorentz{}", k);
    const std::size_t base = info_.size();
    add(prefix + ".E0", ParamKind::center, {}, base + 1);
    add(prefix + ".Gamma", ParamKind::width, {kMinWidth, kInf});
    add(prefix + ".amplitude", ParamKind::scale, {kTiny, kInf});
  }
  for (std::size_t k = 0; k < shape_.phonon_tails.size(); ++k) {
    const auto prefix = fmt::format("tail{}", k);
    const std::size_t base = info_.size();
    add(prefix + ".E_i", ParamKind::onset, {}, base + 1);
    add(prefix + ".T_eff", ParamKind::temperature, {1e-3, kInf});
    add(prefix + ".A", ParamKind::scale, {kTiny, kInf});
  }
  add("irf.sigma", ParamKind::irf_sigma, {0.0, kInf});
  add("baseline", ParamKind::baseline, {0.0, kInf});
}

std::optional<std::size_t> ParameterLayout::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < info_.size(); ++i) {
    if (info_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<double> ParameterLayout::pack(const CompositeModel& m) const {
  if (m.fano_lines.size() != shape_.fano_lines.size() || m.lorentz_lines.size() != shape_.lorentz_lines.size() ||
      m.phonon_tails.size() != shape_.phonon_tails.size()) {
    throw PreconditionError("model does not match the parameter layout");
  }
  std::vector<double> x;
  x.reserve(info_.size());
  for (const auto& line : m.fano_lines) {
    x.insert(x.end(), {line.params.E_n, line.params.Gamma_n, line.params.f_n, line.params.q_n});
  }
  for (const auto& p : m.lorentz_lines) x.insert(x.end(), {p.E_0, p.Gamma, p.amplitude});
  for (const auto& p : m.phonon_tails) x.insert(x.end(), {p.E_i, p.T_eff, p.A});
  x.push_back(m.irf.sigma);
  x.push_back(m.baseline);
  return x;
}

CompositeModel ParameterLayout::unpack(std::span<const double> x) const {
  if (x.size() != info_.size()) throw PreconditionError("parameter vector has the wrong length");
  CompositeModel m = shape_;
  std::size_t i = 0;
  for (auto& line : m.fano_lines) {
    line.params = {x[i], x[i + 1], x[i + 2], x[i + 3]};
    i += 4;
  }
  for (auto& p : m.lorentz_lines) {
    p = {x[i], x[i + 1], x[i + 2]};
    i += 3;
  }
  for (auto& p : m.phonon_tails) {
    p = {x[i], x[i + 1], x[i + 2]};
    i += 3;
  }
  m.irf.sigma = x[i++];
  m.baseline = x[i++];
  return m;
}

std::vector<double> ParameterLayout::natural_scales(std::span<const double> x) const {
  std::vector<double> s(info_.size());
  for (std::size_t i = 0; i < info_.size(); ++i) {
    const auto& inf = info_[i];
    switch (inf.kind) {
      case ParamKind::center:
        s[i] = std::abs(x[*inf.scale_partner]);
        break;
      case ParamKind::onset:
        s[i] = PhysicalConstants::k_B * std::abs(x[*inf.scale_partner]);
        break;
      case ParamKind::asymmetry:
        s[i] = std::max(std::abs(x[i]), 1.0);
        break;
      case ParamKind::irf_sigma:
        s[i] = std::max(std::abs(x[i]), 1e-6);
        break;
      case ParamKind::baseline:
        s[i] = std::max(std::abs(x[i]), 1.0);
        break;
      default:
        s[i] = std::abs(x[i]);
        break;
    }
  }
  return s;
}

}  // namespace rydspec
