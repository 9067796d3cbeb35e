#include "teamemb/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>

namespace teamemb {

std::vector<Pixel> axis_filtered_region(const PlayerAnnotation& p, int height, int width) {
  const auto parts = player_ellipses(p);
  const Ellipse& body = parts[kBody];
  const Ellipse& pelvis = parts[kPelvis];
  const double limit = std::max(body.half_width(), pelvis.half_width()) / 3.0;
  const double len = std::hypot(p.pelvis.x - p.head.x, p.pelvis.y - p.head.y);
  const double ux = (p.pelvis.x - p.head.x) / len, uy = (p.pelvis.y - p.head.y) / len;
  const double reach = std::max(body.semi_major, pelvis.semi_major) + limit;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(p.head.x, p.pelvis.x) - reach)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(p.head.x, p.pelvis.x) + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(p.head.y, p.pelvis.y) - reach)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(p.head.y, p.pelvis.y) + reach)));
  std::vector<Pixel> out;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dist = std::abs(-(x - p.head.x) * uy + (y - p.head.y) * ux);
      if (dist <= limit && (body.contains(x, y) || pelvis.contains(x, y))) out.push_back({y, x});
    }
  return out;
}

std::vector<Pixel> axis_filtered_pixels(const PlayerAnnotation& p, const LabelMap& instances,
                                        std::uint8_t id) {
  std::vector<Pixel> out;
  for (const Pixel& px : axis_filtered_region(p, instances.height, instances.width)) {
    if (instances.at(px.y, px.x) == id) out.push_back(px);
  }
  return out;
}

Histogram512 rgb_histogram(const std::vector<Pixel>& pixels, const RgbImage& image) {
  if (pixels.empty()) throw std::invalid_argument("histogram of an empty pixel set");
  Histogram512 h{};
  for (const Pixel& p : pixels) {
    const std::uint8_t* c = image.at(p.y, p.x);
    h[histogram_bin(c[0], c[1], c[2])] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(pixels.size());
  return h;
}

namespace {

using boost::math::digamma;

struct Posterior {
  // Stick-breaking Beta parameters for components 0..K-2.
  std::vector<double> alpha1, alpha2;
  std::vector<double> beta, shape;            // per component
  std::vector<std::vector<double>> mean, rate;  // per component, per dimension
};

}  // namespace

DpgmmResult fit_dpgmm(const std::vector<std::vector<double>>& x, std::uint64_t seed,
                      const DpgmmOptions& opt) {
  if (x.empty()) throw std::invalid_argument("fit_dpgmm needs at least one sample");
  const std::size_t n = x.size(), dim = x[0].size();
  for (const auto& v : x) {
    if (v.size() != dim) throw std::invalid_argument("fit_dpgmm: samples differ in dimension");
  }
  const int K = opt.truncation;
  const double gamma = 1.0 / K;
  const double b0 = opt.mean_precision;
  const double a0 = (opt.dof > 0 ? opt.dof : static_cast<double>(dim)) / 2.0;
  const double log2pi = std::log(2 * std::numbers::pi);

  std::vector<double> m0(dim, 0.0);
  for (const auto& v : x)
    for (std::size_t d = 0; d < dim; ++d) m0[d] += v[d] / n;
  std::vector<double> r0(dim, 0.0);
  for (const auto& v : x)
    for (std::size_t d = 0; d < dim; ++d) r0[d] += (v[d] - m0[d]) * (v[d] - m0[d]) / n;
  for (double& r : r0) r = (r + opt.variance_floor) / 2.0;

  auto sqdist = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
  };

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> seeds{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
  while (static_cast<int>(seeds.size()) < K) {
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::numeric_limits<double>::infinity();
      for (std::size_t s : seeds) d2[i] = std::min(d2[i], sqdist(x[i], x[s]));
    }
    double total = 0;
    for (double v : d2) total += v;
    if (!(total > 0)) {
      seeds.push_back(seeds.front());
      continue;
    }
    double r = std::uniform_real_distribution<double>(0, total)(rng);
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (r < d2[i]) {
        pick = i;
        break;
      }
      r -= d2[i];
    }
    seeds.push_back(pick);
  }
  // Lloyd iterations from the seeds; the final hard assignment initialises
  // the responsibilities.
  std::vector<std::vector<double>> centres;
  for (std::size_t s : seeds) centres.push_back(x[s]);
  std::vector<int> assign(n, -1);
  for (int round = 0; round < 100; ++round) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      for (int k = 1; k < K; ++k) {
        if (sqdist(x[i], centres[k]) < sqdist(x[i], centres[best])) best = k;
      }
      changed |= assign[i] != best;
      assign[i] = best;
    }
    if (!changed) break;
    for (int k = 0; k < K; ++k) {
      std::vector<double> sum(dim, 0.0);
      int count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != k) continue;
        ++count;
        for (std::size_t d = 0; d < dim; ++d) sum[d] += x[i][d];
      }
      if (count == 0) continue;  // keep an empty centre where it is
      for (std::size_t d = 0; d < dim; ++d) centres[k][d] = sum[d] / count;
    }
  }
  std::vector<std::vector<double>> resp(n, std::vector<double>(K, 0.0));
  for (std::size_t i = 0; i < n; ++i) resp[i][assign[i]] = 1.0;

  Posterior q;
  std::vector<double> counts(K);
  auto m_step = [&] {
    q.alpha1.assign(K - 1, 0.0);
    q.alpha2.assign(K - 1, 0.0);
    q.beta.assign(K, 0.0);
    q.shape.assign(K, 0.0);
    q.mean.assign(K, std::vector<double>(dim));
    q.rate.assign(K, std::vector<double>(dim));
    for (int k = 0; k < K; ++k) {
      double nk = 0;
      std::vector<double> xbar(dim, 0.0), scatter(dim, 0.0);
      for (std::size_t i = 0; i < n; ++i) nk += resp[i][k];
      counts[k] = nk;
      if (nk > 0) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t d = 0; d < dim; ++d) xbar[d] += resp[i][k] * x[i][d] / nk;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t d = 0; d < dim; ++d) {
            const double e = x[i][d] - xbar[d];
            scatter[d] += resp[i][k] * e * e;
          }
      }
      q.beta[k] = b0 + nk;
      q.shape[k] = a0 + nk / 2;
      for (std::size_t d = 0; d < dim; ++d) {
        q.mean[k][d] = (b0 * m0[d] + nk * xbar[d]) / q.beta[k];
        const double off = xbar[d] - m0[d];
        q.rate[k][d] = r0[d] + scatter[d] / 2 + b0 * nk * off * off / (2 * q.beta[k]);
      }
    }
    for (int k = 0; k + 1 < K; ++k) {
      double tail = 0;
      for (int j = k + 1; j < K; ++j) tail += counts[j];
      q.alpha1[k] = 1 + counts[k];
      q.alpha2[k] = gamma + tail;
    }
  };

  auto expected_log_pi = [&] {
    std::vector<double> out(K, 0.0);
    double acc = 0;
    for (int k = 0; k < K; ++k) {
      if (k + 1 < K) {
        const double s = digamma(q.alpha1[k] + q.alpha2[k]);
        out[k] = acc + digamma(q.alpha1[k]) - s;
        acc += digamma(q.alpha2[k]) - s;
      } else {
        out[k] = acc;
      }
    }
    return out;
  };

  // Per-sample, per-component expected log likelihood.
  auto expected_loglik = [&](std::size_t i, int k) {
    const double elog_shape = digamma(q.shape[k]);
    double s = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double e = x[i][d] - q.mean[k][d];
      const double elog_lambda = elog_shape - std::log(q.rate[k][d]);
      s += 0.5 * elog_lambda - 0.5 * log2pi -
           0.5 * (q.shape[k] / q.rate[k][d] * e * e + 1.0 / q.beta[k]);
    }
    return s;
  };

  auto e_step = [&] {
    const auto lp = expected_log_pi();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> lr(K);
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) mx = std::max(mx, lr[k] = lp[k] + expected_loglik(i, k));
      double z = 0;
      for (int k = 0; k < K; ++k) z += (lr[k] = std::exp(lr[k] - mx));
      for (int k = 0; k < K; ++k) resp[i][k] = lr[k] / z;
    }
  };

  auto elbo = [&] {
    const auto lp = expected_log_pi();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k) {
        const double r = resp[i][k];
        if (r <= 0) continue;
        total += r * (expected_loglik(i, k) + lp[k] - std::log(r));
      }
    for (int k = 0; k + 1 < K; ++k) {
      const double a = q.alpha1[k], b = q.alpha2[k];
      const double s = digamma(a + b);
      const double elv = digamma(a) - s, el1v = digamma(b) - s;
      total += std::log(gamma) + (gamma - 1) * el1v;
      const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
      total -= -log_beta + (a - 1) * elv + (b - 1) * el1v;
    }
    for (int k = 0; k < K; ++k) {
      const double a = q.shape[k], beta = q.beta[k];
      for (std::size_t d = 0; d < dim; ++d) {
        const double rate = q.rate[k][d];
        const double elog_lambda = digamma(a) - std::log(rate), e_lambda = a / rate;
        const double off = q.mean[k][d] - m0[d];
        total += 0.5 * std::log(b0 / (2 * std::numbers::pi)) + 0.5 * elog_lambda -
                 0.5 * b0 * (e_lambda * off * off + 1.0 / beta) + a0 * std::log(r0[d]) -
                 std::lgamma(a0) + (a0 - 1) * elog_lambda - r0[d] * e_lambda;
        total -= 0.5 * std::log(beta / (2 * std::numbers::pi)) + 0.5 * elog_lambda - 0.5 +
                 a * std::log(rate) - std::lgamma(a) + (a - 1) * elog_lambda - a;
      }
    }
    return total;
  };

  DpgmmResult out;
  m_step();
  for (int it = 0; it < opt.max_iterations; ++it) {
    e_step();
    m_step();
    out.elbo.push_back(elbo());
    out.iterations = it + 1;
    if (it > 0 && std::abs(out.elbo[it] - out.elbo[it - 1]) < opt.tolerance) {
      out.converged = true;
      break;
    }
  }

  out.counts = counts;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = static_cast<int>(std::max_element(resp[i].begin(), resp[i].end()) - resp[i].begin());
  }
  // With one or two samples no component can exceed one sample; fall back to
  // half a sample so each sample still counts.
  const double floor = n > 2 ? 1.0 : 0.5;
  for (double c : counts) out.effective_components += c > floor;
  double rest = 1.0;
  for (int k = 0; k < K; ++k) {
    if (k + 1 < K) {
      const double v = q.alpha1[k] / (q.alpha1[k] + q.alpha2[k]);
      out.weights.push_back(rest * v);
      rest *= 1 - v;
    } else {
      out.weights.push_back(rest);
    }
    out.means.push_back(q.mean[k]);
    std::vector<double> prec(dim);
    for (std::size_t d = 0; d < dim; ++d) prec[d] = q.shape[k] / q.rate[k][d];
    out.precisions.push_back(prec);
  }
  return out;
}

std::vector<BaselineLabel> baseline_assign(const Scene& scene, std::uint64_t seed,
                                           const DpgmmOptions& options) {
  const SceneMasks masks = compose_scene_masks(scene.players, scene.image.height, scene.image.width);
  std::vector<BaselineLabel> out;
  std::vector<std::vector<double>> hists;
  std::vector<std::size_t> assignable;
  for (std::size_t k = 0; k < scene.players.size(); ++k) {
    const auto px = axis_filtered_pixels(scene.players[k], masks.instances, static_cast<std::uint8_t>(k + 1));
    out.push_back({static_cast<int>(k), 0, px.empty() ? BaselineFlag::kEmpty : BaselineFlag::kOk});
    if (px.empty()) continue;
    const Histogram512 h = rgb_histogram(px, scene.image);
    hists.emplace_back(h.begin(), h.end());
    assignable.push_back(k);
  }
  if (hists.empty()) return out;
  const DpgmmResult fit = fit_dpgmm(hists, seed, options);
  // Labels follow first appearance so the first assignable player is team 1.
  std::vector<int> relabel(options.truncation, 0);
  int next = 1;
  for (std::size_t j = 0; j < assignable.size(); ++j) {
    int& l = relabel[fit.labels[j]];
    if (!l) l = next++;
    out[assignable[j]].label = fit.effective_components <= 1 ? 1 : std::min(l, 2);
  }
  return out;
}

void write_baseline_csv(const std::filesystem::path& path, const std::vector<BaselineRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "scene_id,player_index,true_team,predicted_label,flag\n";
  for (const BaselineRow& r : rows) {
    out << r.scene_id << ',' << r.player_index << ',' << (r.true_team == Team::kA ? 'A' : 'B') << ','
        << r.predicted_label << ',' << (r.flag == BaselineFlag::kOk ? "ok" : "empty") << '\n';
  }
}

}  // namespace teamemb
