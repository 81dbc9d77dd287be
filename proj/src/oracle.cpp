#include "carl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace carl::oracle {

void FockOracleConfig::validate() const {
  if (cutoff_a < 1 || cutoff_minus < 1 || cutoff_plus < 1) throw std::invalid_argument("cutoffs must be >= 1");
  if (!(time_step > 0.0)) throw std::invalid_argument("time_step must be > 0");
  auto unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!unit(truncation_tol) || !unit(convergence_tol)) {
    throw std::invalid_argument("tolerances must lie in (0, 1)");
  }
}

FockOracleConfig FockOracleConfig::scaled(double factor) const {
  FockOracleConfig c = *this;
  c.cutoff_a = static_cast<int>(std::ceil(cutoff_a * factor));
  c.cutoff_minus = static_cast<int>(std::ceil(cutoff_minus * factor));
  c.cutoff_plus = static_cast<int>(std::ceil(cutoff_plus * factor));
  return c;
}

FockBasis::FockBasis(int cutoff_a, int cutoff_minus, int cutoff_plus)
    : cutoffs_{cutoff_a, cutoff_minus, cutoff_plus},
      size_(static_cast<std::size_t>(cutoff_a + 1) * static_cast<std::size_t>(cutoff_minus + 1) *
            static_cast<std::size_t>(cutoff_plus + 1)) {}

std::size_t FockBasis::index(int n_a, int n_minus, int n_plus) const {
  return (static_cast<std::size_t>(n_a) * static_cast<std::size_t>(cutoffs_[1] + 1) +
          static_cast<std::size_t>(n_minus)) *
             static_cast<std::size_t>(cutoffs_[2] + 1) +
         static_cast<std::size_t>(n_plus);
}

std::array<int, 3> FockBasis::occupation(std::size_t index) const {
  const auto np1 = static_cast<std::size_t>(cutoffs_[2] + 1);
  const auto nm1 = static_cast<std::size_t>(cutoffs_[1] + 1);
  const int n_plus = static_cast<int>(index % np1);
  index /= np1;
  const int n_minus = static_cast<int>(index % nm1);
  return {static_cast<int>(index / nm1), n_minus, n_plus};
}

bool FockBasis::contains(int n_a, int n_minus, int n_plus) const {
  return n_a >= 0 && n_minus >= 0 && n_plus >= 0 && n_a <= cutoffs_[0] && n_minus <= cutoffs_[1] &&
         n_plus <= cutoffs_[2];
}

int FockBasis::charge(std::size_t index) const {
  const auto n = occupation(index);
  return n[0] - n[1] + n[2];
}

SparseMatrix build_hamiltonian(const ModelParams& model, const FockOracleConfig& config) {
  model.validate();
  config.validate();
  const FockBasis basis(config.cutoff_a, config.cutoff_minus, config.cutoff_plus);
  if (basis.size() > config.max_dimension) {
    std::ostringstream msg;
    msg << "Fock basis of dimension " << basis.size() << " exceeds the budget of " << config.max_dimension;
    throw ResourceError(msg.str());
  }

  const double chi = model.chi;
  std::vector<Eigen::Triplet<cplx>> triplets;
  triplets.reserve(basis.size() * 5);
  auto couple = [&](std::size_t col, int a, int m, int p, double amplitude) {
    if (chi == 0.0 || !basis.contains(a, m, p)) return;
    triplets.emplace_back(static_cast<int>(basis.index(a, m, p)), static_cast<int>(col), chi * amplitude);
  };

  for (std::size_t k = 0; k < basis.size(); ++k) {
    const auto [na, nm, np] = basis.occupation(k);
    const double diag = np + nm - model.delta * na;
    if (diag != 0.0) triplets.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
    couple(k, na + 1, nm + 1, np, std::sqrt((na + 1.0) * (nm + 1.0)));  // a^dag c_-^dag
    couple(k, na - 1, nm - 1, np, std::sqrt(double(na) * nm));          // c_- a
    couple(k, na + 1, nm, np - 1, std::sqrt((na + 1.0) * np));          // a^dag c_+
    couple(k, na - 1, nm, np + 1, std::sqrt(na * (np + 1.0)));          // c_+^dag a
  }

  SparseMatrix h(static_cast<int>(basis.size()), static_cast<int>(basis.size()));
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

SparseMatrix charge_operator(const FockBasis& basis) {
  SparseMatrix q(static_cast<int>(basis.size()), static_cast<int>(basis.size()));
  std::vector<Eigen::Triplet<cplx>> triplets;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const int c = basis.charge(k);
    if (c != 0) triplets.emplace_back(static_cast<int>(k), static_cast<int>(k), double(c));
  }
  q.setFromTriplets(triplets.begin(), triplets.end());
  return q;
}

FockState initial_state(const ModelParams& model, const FockOracleConfig& config) {
  model.validate();
  config.validate();
  FockState s;
  s.basis = FockBasis(config.cutoff_a, config.cutoff_minus, config.cutoff_plus);
  s.alpha = model.alpha;
  s.amplitudes = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(s.basis.size()));

  // c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!), by recursion
  const double a2 = std::norm(model.alpha);
  cplx c = std::exp(-0.5 * a2);
  double kept = 0.0;
  for (int n = 0; n <= config.cutoff_a; ++n) {
    if (n > 0) c *= model.alpha / std::sqrt(double(n));
    s.amplitudes(static_cast<Eigen::Index>(s.basis.index(n, 0, 0))) = c;
    kept += std::norm(c);
  }
  // dropped tail summed directly, 1 - kept would lose it to cancellation
  double tail = 0.0;
  for (int n = config.cutoff_a + 1; n < config.cutoff_a + 400; ++n) {
    c *= model.alpha / std::sqrt(double(n));
    const double w = std::norm(c);
    tail += w;
    if (w < 1e-300 || (n > a2 && w < 1e-18 * tail)) break;
  }
  s.truncated_weight = tail;
  if (tail >= config.truncation_tol) {
    std::ostringstream msg;
    msg << "cutoff_a = " << config.cutoff_a << " drops coherent weight " << tail << " >= truncation_tol";
    throw CutoffInsufficientError(Mode::Probe, tail, msg.str());
  }
  s.amplitudes /= std::sqrt(kept);
  s.norm = s.amplitudes.norm();
  return s;
}

namespace {

double infinity_norm(const SparseMatrix& h) {
  double best = 0.0;
  for (int r = 0; r < h.outerSize(); ++r) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(h, r); it; ++it) row += std::abs(it.value());
    best = std::max(best, row);
  }
  return best;
}

// One step psi <- exp(-i H dt) psi by Taylor series to working precision.
void taylor_step(const SparseMatrix& h, double dt, Eigen::VectorXcd& psi) {
  Eigen::VectorXcd term = psi;
  Eigen::VectorXcd sum = psi;
  const cplx factor(0.0, -dt);
  for (int k = 1; k <= 80; ++k) {
    term = (factor / double(k)) * (h * term);
    sum += term;
    if (term.norm() <= 1e-17 * sum.norm()) break;
  }
  psi = sum;
}

struct Block {
  std::vector<std::size_t> indices;
  SparseMatrix hamiltonian;
  Eigen::VectorXcd psi;
};

std::array<double, 3> boundary_weights(const FockBasis& basis, const Eigen::VectorXcd& psi) {
  std::array<double, 3> w{};
  const auto& cut = basis.cutoffs();
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double p = std::norm(psi(static_cast<Eigen::Index>(k)));
    if (p == 0.0) continue;
    const auto n = basis.occupation(k);
    for (int i = 0; i < 3; ++i) {
      if (n[i] > 0 && n[i] >= cut[i] - 1) w[i] += p;
    }
  }
  return w;
}

}  // namespace

FockState evolve(const ModelParams& model, const FockOracleConfig& config, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("tau must be >= 0");
  FockState state = initial_state(model, config);
  const SparseMatrix h = build_hamiltonian(model, config);
  const FockBasis& basis = state.basis;

  std::vector<Block> blocks;
  if (config.use_charge_blocks) {
    std::map<int, std::vector<std::size_t>> by_charge;
    for (std::size_t k = 0; k < basis.size(); ++k) by_charge[basis.charge(k)].push_back(k);
    for (auto& [q, indices] : by_charge) {
      Eigen::VectorXcd psi(static_cast<Eigen::Index>(indices.size()));
      for (std::size_t j = 0; j < indices.size(); ++j) {
        psi(static_cast<Eigen::Index>(j)) = state.amplitudes(static_cast<Eigen::Index>(indices[j]));
      }
      if (psi.squaredNorm() == 0.0) continue;  // H never populates an empty charge sector

      std::vector<long> local(basis.size(), -1);
      for (std::size_t j = 0; j < indices.size(); ++j) local[indices[j]] = static_cast<long>(j);
      std::vector<Eigen::Triplet<cplx>> triplets;
      for (std::size_t j = 0; j < indices.size(); ++j) {
        for (SparseMatrix::InnerIterator it(h, static_cast<int>(indices[j])); it; ++it) {
          triplets.emplace_back(static_cast<int>(j), static_cast<int>(local[static_cast<std::size_t>(it.col())]),
                                it.value());
        }
      }
      Block b;
      b.indices = std::move(indices);
      b.hamiltonian = SparseMatrix(static_cast<int>(b.indices.size()), static_cast<int>(b.indices.size()));
      b.hamiltonian.setFromTriplets(triplets.begin(), triplets.end());
      b.psi = std::move(psi);
      blocks.push_back(std::move(b));
    }
  } else {
    Block b;
    b.indices.resize(basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k) b.indices[k] = k;
    b.hamiltonian = h;
    b.psi = state.amplitudes;
    blocks.push_back(std::move(b));
  }

  const double hnorm = std::max(1.0, infinity_norm(h));
  const double max_dt = std::min(config.time_step, 1.0 / hnorm);
  const long steps = tau > 0.0 ? static_cast<long>(std::ceil(tau / max_dt - 1e-12)) : 0;
  const double dt = steps > 0 ? tau / static_cast<double>(steps) : 0.0;

  auto scatter = [&] {
    for (const Block& b : blocks) {
      for (std::size_t j = 0; j < b.indices.size(); ++j) {
        state.amplitudes(static_cast<Eigen::Index>(b.indices[j])) = b.psi(static_cast<Eigen::Index>(j));
      }
    }
  };
  auto monitor = [&] {
    const auto w = boundary_weights(basis, state.amplitudes);
    for (int i = 0; i < 3; ++i) {
      if (w[i] > state.leakage) {
        state.leakage = w[i];
        state.leakiest_mode = static_cast<Mode>(i);
      }
    }
  };

  monitor();
  for (long s = 0; s < steps; ++s) {
    for (Block& b : blocks) taylor_step(b.hamiltonian, dt, b.psi);
    scatter();
    monitor();
  }
  state.tau = tau;
  state.norm = state.amplitudes.norm();

  if (state.leakage > config.convergence_tol) {
    std::ostringstream msg;
    msg << "cutoff insufficient: weight " << state.leakage << " near the cutoff of mode "
        << mode_name(state.leakiest_mode);
    throw CutoffInsufficientError(state.leakiest_mode, state.leakage, msg.str());
  }
  return state;
}

cplx expect_lowering(const FockState& state, int ka, int km, int kp) {
  const FockBasis& basis = state.basis;
  auto falling = [](int n, int k) {
    double r = 1.0;
    for (int j = 0; j < k; ++j) r *= n - j;
    return std::sqrt(r);
  };
  cplx sum = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const auto n = basis.occupation(k);
    if (n[0] < ka || n[1] < km || n[2] < kp) continue;
    const cplx amp = state.amplitudes(static_cast<Eigen::Index>(k));
    if (amp == cplx(0.0)) continue;
    const auto target = basis.index(n[0] - ka, n[1] - km, n[2] - kp);
    sum += std::conj(state.amplitudes(static_cast<Eigen::Index>(target))) * amp * falling(n[0], ka) *
           falling(n[1], km) * falling(n[2], kp);
  }
  return sum;
}

ObservablesRecord oracle_moments(const FockState& state, double atom_count) {
  if (!(atom_count > 0.0)) throw std::invalid_argument("atom_count must be > 0");
  ObservablesRecord rec;
  rec.tau = state.tau;
  const double norm2 = state.amplitudes.squaredNorm();

  const std::array<std::array<int, 3>, 3> unit = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  std::array<cplx, 3> mean{}, square{};
  std::array<double, 3> n{}, falling2{};
  for (int i = 0; i < 3; ++i) {
    const auto& e = unit[i];
    mean[i] = expect_lowering(state, e[0], e[1], e[2]);
    square[i] = expect_lowering(state, 2 * e[0], 2 * e[1], 2 * e[2]);
    n[i] = expect_diagonal(state, [i](int a, int m, int p) { return double(std::array{a, m, p}[i]); });
    falling2[i] = expect_diagonal(state, [i](int a, int m, int p) {
      const double x = std::array{a, m, p}[i];
      return x * (x - 1.0);
    });
  }
  rec.means = {mean[0], mean[1], mean[2]};
  rec.intensity = {n[0], n[1], n[2]};
  for (int i = 0; i < 3; ++i) {
    if (n[i] >= kIntensityFloor) rec.g2[i] = falling2[i] / (n[i] * n[i]);
  }

  for (Pair p : kPairs) {
    const auto [mi, mj] = pair_modes(p);
    const int i = idx(mi), j = idx(mj);
    Maybe g2_ij;
    if (n[i] >= kIntensityFloor && n[j] >= kIntensityFloor) {
      const double nn = expect_diagonal(state, [i, j](int a, int m, int pl) {
        const std::array<int, 3> occ{a, m, pl};
        return double(occ[i]) * double(occ[j]);
      });
      g2_ij = nn / (n[i] * n[j]);
    }
    rec.cross[static_cast<int>(p)] = correlation_bounds(g2_ij, rec.g2[i], rec.g2[j], n[i], n[j]);
  }

  if (state.alpha != cplx(0.0)) {
    for (int i = 0; i < 3; ++i) {
      const double ell = std::abs(mean[i]);
      if (ell < kIntensityFloor) continue;
      const double phi = std::arg(mean[i]);
      auto variance = [&](double theta) {
        const cplx rot = std::exp(cplx(0.0, -2.0 * theta));
        const double second = 0.25 * (2.0 * (rot * square[i]).real() + 2.0 * n[i] + norm2);
        const double first = (std::exp(cplx(0.0, -theta)) * mean[i]).real();
        return second - first * first;
      };
      rec.uncertainty[i] = {std::sqrt(variance(phi)) / ell, std::sqrt(variance(phi + 0.5 * M_PI)) / ell};
    }
  }

  const cplx minus_plus = expect_lowering(state, 0, 1, 1);
  rec.bunch.mean = (std::conj(mean[1]) + mean[2]) / std::sqrt(atom_count);
  rec.bunch.intensity = (n[1] + norm2 + 2.0 * minus_plus.real() + n[2]) / atom_count;
  rec.depletion_fraction = (n[1] + n[2]) / atom_count;
  return rec;
}

std::vector<RecordField> record_fields(const ObservablesRecord& rec) {
  std::vector<RecordField> f;
  for (Mode m : kModes) {
    const std::string name = mode_name(m);
    f.push_back({"mean_" + name + "_re", rec.means[m].real(), false});
    f.push_back({"mean_" + name + "_im", rec.means[m].imag(), false});
    f.push_back({"I_" + name, rec.intensity[m], false});
  }
  for (Mode m : kModes) {
    const std::string name = mode_name(m);
    f.push_back({"dl_" + name, rec.uncertainty[idx(m)].relative_amplitude, false});
    f.push_back({"dphi_" + name, rec.uncertainty[idx(m)].phase, false});
  }
  f.push_back({"B_re", rec.bunch.mean.real(), false});
  f.push_back({"B_im", rec.bunch.mean.imag(), false});
  f.push_back({"BdagB", rec.bunch.intensity, false});
  f.push_back({"depletion", rec.depletion_fraction, false});
  for (Mode m : kModes) f.push_back({std::string("g2_") + mode_name(m), rec.g2[idx(m)], true});
  for (Pair p : kPairs) {
    const auto& c = rec.pair(p);
    const std::string name = pair_name(p);
    f.push_back({"g2_" + name, c.g2, true});
    f.push_back({"cs_" + name, c.cs_bound, true});
    f.push_back({"qb_" + name, c.quantum_bound, true});
  }
  return f;
}

RecordDifference compare_records(const ObservablesRecord& x, const ObservablesRecord& y) {
  const auto fx = record_fields(x);
  const auto fy = record_fields(y);
  RecordDifference d;
  double worst = -1.0;
  for (std::size_t k = 0; k < fx.size(); ++k) {
    double diff;
    if (fx[k].value.has_value() != fy[k].value.has_value()) {
      d.definedness_mismatch = true;
      diff = std::numeric_limits<double>::infinity();
    } else if (!fx[k].value) {
      continue;
    } else {
      diff = std::abs(*fx[k].value - *fy[k].value) / std::max(1.0, std::abs(*fy[k].value));
    }
    double& slot = fx[k].fourth_order ? d.fourth_order : d.low_order;
    slot = std::max(slot, diff);
    if (diff > worst) {
      worst = diff;
      d.worst_field = fx[k].name;
    }
  }
  return d;
}

ConvergedRecord convergence_ladder(const ModelParams& model, double tau, const FockOracleConfig& base,
                                   double atom_count) {
  base.validate();
  const std::array<double, 3> factors = {1.0, 1.5, 2.0};
  std::optional<ObservablesRecord> previous;
  std::string last_problem = "no rung completed";
  for (std::size_t r = 0; r < factors.size(); ++r) {
    const FockOracleConfig cfg = base.scaled(factors[r]);
    ObservablesRecord current;
    try {
      current = oracle_moments(evolve(model, cfg, tau), atom_count);
    } catch (const CutoffInsufficientError& e) {
      last_problem = e.what();
      previous.reset();
      continue;
    }
    if (previous) {
      const RecordDifference d = compare_records(current, *previous);
      const double worst = std::max(d.low_order, d.fourth_order);
      if (!d.definedness_mismatch && worst < base.convergence_tol) {
        return {current, cfg, worst, static_cast<int>(r) + 1};
      }
      std::ostringstream msg;
      msg << "rung x" << factors[r] << " differs from its predecessor by " << worst << " in " << d.worst_field;
      last_problem = msg.str();
    }
    previous = current;
  }
  throw ConvergenceError("Fock cutoff ladder did not converge: " + last_problem);
}

WickComparison compare_with_wick(const ModelParams& model, double tau, const FockOracleConfig& base,
                                 double atom_count) {
  WickComparison out;
  out.oracle = convergence_ladder(model, tau, base, atom_count);
  out.wick = observables(propagate_auto(model, tau), model.alpha, atom_count);
  out.difference = compare_records(out.oracle.record, out.wick);
  return out;
}

}  // namespace carl::oracle
