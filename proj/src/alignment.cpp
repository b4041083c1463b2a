/*
 * Copyright 2026 The Hybrid Replay Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hr/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hr/error.hpp"

namespace hr {

namespace {

struct Point {
  const ClassKey* key;
  const CentroidEntry* entry;
};

std::vector<Point> points_of(const CentroidTable& table) {
  std::vector<Point> pts;
  pts.reserve(table.size());
  for (const auto& [key, e] : table) pts.push_back({&key, &e});
  return pts;
}

double distance_checked(const Point& a, const Point& b) {
  const double r = std::sqrt(squared_distance(a.entry->embedding, b.entry->embedding));
  if (r == 0.0) {
    fail(ErrorKind::kDegenerate, "centroids " + to_string(*a.key) + " and " + to_string(*b.key) + " coincide");
  }
  return r;
}

// Applies `displacements` (table order) to movable entries, clipping each to `max_step`.
CentroidTable apply_displacements(const CentroidTable& table, const std::vector<std::vector<double>>& displacements,
                                  double max_step) {
  CentroidTable out = table;
  std::size_t i = 0;
  for (auto& [key, e] : out) {
    const auto& d = displacements[i++];
    if (e.frozen) continue;
    double scale = 1.0;
    if (max_step > 0.0) {
      double n = 0.0;
      for (double v : d) n += v * v;
      n = std::sqrt(n);
      if (n > max_step) scale = max_step / n;
    }
    for (std::size_t k = 0; k < e.embedding.size(); ++k) e.embedding[k] += scale * d[k];
    if (!std::all_of(e.embedding.begin(), e.embedding.end(), [](double v) { return std::isfinite(v); })) {
      fail(ErrorKind::kDivergence, "centroid " + to_string(key) +
                                       " became non-finite during alignment; use a smaller learning rate");
    }
  }
  return out;
}

std::vector<std::vector<double>> lj_displacements(const CentroidTable& table, const LJParams& p, double eta) {
  const auto pts = points_of(table);
  const std::size_t dim = table.dim();
  std::vector<std::vector<double>> disp(pts.size(), std::vector<double>(dim, 0.0));
  const double floor_r = 1e-6 * p.sigma;
  const double s6 = std::pow(p.sigma, 6), s12 = s6 * s6;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    if (pts[a].entry->frozen) continue;
    for (std::size_t b = 0; b < pts.size(); ++b) {
      if (a == b) continue;
      const auto& pa = pts[a].entry->embedding;
      const auto& pb = pts[b].entry->embedding;
      const double r = std::max(std::sqrt(squared_distance(pa, pb)), floor_r);
      const double bracket = 24.0 * p.epsilon * (2.0 * s12 / std::pow(r, 13) - s6 / std::pow(r, 7));
      // Analytic: -eta * 2 * dV/dr * (pa - pb) / r with dV/dr = -bracket.
      const double coeff = p.gradient_source == GradientSource::kAnalytic ? 2.0 * eta * bracket / r : -eta * bracket;
      for (std::size_t k = 0; k < dim; ++k) disp[a][k] += coeff * (pa[k] - pb[k]);
    }
  }
  return disp;
}

std::vector<std::vector<double>> rfa_displacements(const CentroidTable& table, double strength, double eta) {
  const auto pts = points_of(table);
  const std::size_t dim = table.dim();
  std::vector<std::vector<double>> disp(pts.size(), std::vector<double>(dim, 0.0));
  for (std::size_t a = 0; a < pts.size(); ++a) {
    if (pts[a].entry->frozen) continue;
    for (std::size_t b = 0; b < pts.size(); ++b) {
      if (a == b) continue;
      const auto& pa = pts[a].entry->embedding;
      const auto& pb = pts[b].entry->embedding;
      const double r = std::max(std::sqrt(squared_distance(pa, pb)), 1e-12);
      const double coeff = eta * strength / (r * r * r);
      for (std::size_t k = 0; k < dim; ++k) disp[a][k] += coeff * (pa[k] - pb[k]);
    }
  }
  return disp;
}

double max_norm(const CentroidTable& before, const CentroidTable& after) {
  double best = 0.0;
  auto ia = before.begin();
  for (auto ib = after.begin(); ib != after.end(); ++ia, ++ib) {
    best = std::max(best, std::sqrt(squared_distance(ia->second.embedding, ib->second.embedding)));
  }
  return best;
}

}  // namespace

void LJParams::validate() const {
  if (!(epsilon > 0.0) || !(sigma > 0.0) || !(eta > 0.0) || max_iters < 1 || !(min_step >= 0.0) ||
      !(max_step_sigma >= 0.0)) {
    fail(ErrorKind::kConfig, "Lennard-Jones parameters need epsilon, sigma, eta > 0, max_iters >= 1, "
                             "min_step >= 0 and max_step_sigma >= 0");
  }
}

double lj_pair_energy(double r, double epsilon, double sigma) {
  const double s6 = std::pow(sigma / r, 6);
  return 4.0 * epsilon * (s6 * s6 - s6);
}

double lj_potential(const CentroidTable& table, const LJParams& params) {
  const auto pts = points_of(table);
  double total = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = 0; b < pts.size(); ++b) {
      if (a == b) continue;
      total += lj_pair_energy(distance_checked(pts[a], pts[b]), params.epsilon, params.sigma);
    }
  }
  return total;
}

std::vector<std::vector<double>> lj_gradient(const CentroidTable& table, const LJParams& params) {
  const auto pts = points_of(table);
  const std::size_t dim = table.dim();
  std::vector<std::vector<double>> grad(pts.size(), std::vector<double>(dim, 0.0));
  const double s6 = std::pow(params.sigma, 6), s12 = s6 * s6;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = 0; b < pts.size(); ++b) {
      if (a == b) continue;
      const double r = distance_checked(pts[a], pts[b]);
      const double dv_dr = -24.0 * params.epsilon * (2.0 * s12 / std::pow(r, 13) - s6 / std::pow(r, 7));
      for (std::size_t k = 0; k < dim; ++k) {
        grad[a][k] += 2.0 * dv_dr * (pts[a].entry->embedding[k] - pts[b].entry->embedding[k]) / r;
      }
    }
  }
  return grad;
}

CentroidTable lj_step(const CentroidTable& table, const LJParams& params) {
  params.validate();
  return apply_displacements(table, lj_displacements(table, params, params.eta),
                             params.max_step_sigma * params.sigma);
}

double rfa_energy(const CentroidTable& table, double strength) {
  const auto pts = points_of(table);
  double total = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = 0; b < pts.size(); ++b) {
      if (a != b) total += strength / distance_checked(pts[a], pts[b]);
    }
  }
  return total;
}

CentroidTable rfa_step(const CentroidTable& table, double strength, double eta, double max_step) {
  if (!(strength > 0.0) || !(eta >= 0.0)) fail(ErrorKind::kConfig, "repulsive step needs strength > 0 and eta >= 0");
  return apply_displacements(table, rfa_displacements(table, strength, eta), max_step);
}

CentroidTable align_new_task(const CentroidTable& table, int task, std::span<const UnalignedCentroid> reports,
                             const AlignmentConfig& config, AlignmentReport* report) {
  config.lj.validate();
  const bool lj = config.method == AlignmentMethod::kLennardJones;
  if (!lj && !(config.rfa_strength > 0.0)) fail(ErrorKind::kConfig, "rfa_strength must be positive");

  for (const auto& [key, e] : table) {
    if (key.task >= task) {
      fail(ErrorKind::kProtocol, "table already holds " + to_string(key) + " while aligning task " +
                                     std::to_string(task));
    }
  }

  struct Merge {
    std::vector<double> weighted;
    std::size_t count = 0;
    int best_client = 0;
    std::size_t best_count = 0;
  };
  std::map<int, Merge> merged;
  for (const auto& r : reports) {
    if (r.sample_count == 0) continue;
    auto& m = merged[r.cls];
    if (m.weighted.empty()) m.weighted.assign(r.embedding.size(), 0.0);
    if (r.embedding.size() != m.weighted.size()) fail(ErrorKind::kConfig, "unaligned centroids differ in dimension");
    for (std::size_t k = 0; k < r.embedding.size(); ++k) {
      m.weighted[k] += static_cast<double>(r.sample_count) * r.embedding[k];
    }
    m.count += r.sample_count;
    if (r.sample_count > m.best_count || (r.sample_count == m.best_count && r.client < m.best_client)) {
      m.best_client = r.client;
      m.best_count = r.sample_count;
    }
  }

  CentroidTable current = table;
  for (auto& [cls, m] : merged) {
    ClassKey key{task, cls};
    if (table.contains(key)) fail(ErrorKind::kProtocol, "centroid " + to_string(key) + " is already frozen");
    for (auto& v : m.weighted) v /= static_cast<double>(m.count);
    current.insert(key, {m.weighted, m.best_client, false});
  }

  const double max_step = config.lj.max_step_sigma * config.lj.sigma;
  auto energy = [&](const CentroidTable& t) {
    return lj ? lj_potential(t, config.lj) : rfa_energy(t, config.rfa_strength);
  };
  // The cap shrinks with eta so that halving always shortens a capped step.
  auto step = [&](const CentroidTable& t, double eta) {
    const double cap = max_step * eta / config.lj.eta;
    return lj ? apply_displacements(t, lj_displacements(t, config.lj, eta), cap)
              : apply_displacements(t, rfa_displacements(t, config.rfa_strength, eta), cap);
  };

  AlignmentReport rep;
  if (current.size() >= 2 && !merged.empty()) {
    double u = energy(current);
    rep.initial_energy = u;
    for (int it = 0; it < config.lj.max_iters; ++it) {
      double eta = config.lj.eta;
      bool accepted = false;
      CentroidTable candidate;
      double u_new = u;
      for (int attempt = 0; attempt <= 10; ++attempt, eta *= 0.5) {
        candidate = step(current, eta);
        try {
          u_new = energy(candidate);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kDegenerate) throw;
          continue;
        }
        if (u_new <= u) {
          accepted = true;
          break;
        }
      }
      rep.iterations = it + 1;
      if (!accepted) {
        rep.non_decrease_warning = true;
        rep.note = "step rejected after 10 halvings at iteration " + std::to_string(it + 1);
        break;
      }
      const double moved = max_norm(current, candidate);
      current = std::move(candidate);
      u = u_new;
      if (moved < config.lj.min_step) {
        rep.converged = true;
        break;
      }
    }
    rep.final_energy = u;
    if (rep.final_energy > rep.initial_energy) rep.non_decrease_warning = true;
  }
  current.freeze_all();
  if (report != nullptr) *report = rep;
  return current;
}

}  // namespace hr
