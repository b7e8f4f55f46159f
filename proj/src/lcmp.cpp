#include "li/lcmp.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "li/errors.hpp"

namespace li {

double matern_cov(double d, const MaternParams& p) {
  if (d < 0.0) throw NumericalError("matern_cov: negative distance");
  if (d == 0.0) return p.sigma2;
  const double nu = p.nu;
  const double arg = std::sqrt(2.0 * nu) * d / p.alpha;
  if (arg < 1e-12) return p.sigma2;
  const double scale =
      p.sigma2 * std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(arg));
  return scale * bessel_k(nu, arg);
}

namespace {

// Lower Cholesky factor of the grid's Matern covariance; the expensive part
// of field simulation, reusable across fields sharing (nu, alpha).
Matrix gp_factor(int w, int h, const MaternParams& p, int entry_cap) {
  const int n = w * h;
  if (n > entry_cap)
    throw ConfigError("simulate_gp_field: grid of " + std::to_string(n) +
                      " entries exceeds cap " + std::to_string(entry_cap));

  // Pixel distances take few distinct squared values on a grid; cache the
  // covariance per squared distance.
  std::unordered_map<long long, double> cov_cache;
  cov_cache.reserve(static_cast<std::size_t>(w) * h);
  auto cov_at = [&](long long d2) {
    auto it = cov_cache.find(d2);
    if (it != cov_cache.end()) return it->second;
    const double c = matern_cov(std::sqrt(static_cast<double>(d2)), p);
    cov_cache.emplace(d2, c);
    return c;
  };

  Matrix cov(n, n);
  for (int i = 0; i < n; ++i) {
    const long long xi = i % w, yi = i / w;
    for (int j = 0; j <= i; ++j) {
      const long long xj = j % w, yj = j / w;
      const long long d2 = (xi - xj) * (xi - xj) + (yi - yj) * (yi - yj);
      cov(i, j) = cov(j, i) = cov_at(d2);
    }
  }
  return cholesky_psd(cov, 1e-8 * p.sigma2).l;
}

Vector gp_draw(const Matrix& factor, RngStream& rng) {
  Vector z(factor.rows());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return factor.triangularView<Eigen::Lower>() * z;
}

}  // namespace

Vector simulate_gp_field(int w, int h, const MaternParams& p, RngStream& rng,
                         int entry_cap) {
  return gp_draw(gp_factor(w, h, p, entry_cap), rng);
}

IntensityFields build_intensities(const SourceFeatures& f, int w, int h,
                                  RngStream& rng, int entry_cap) {
  const double nu_l = std::max(f.nu_lambda, kMinRoughness);
  const double al_l = std::max(f.alpha_lambda, kMinBandwidth);
  const double nu_b = std::max(f.nu_b, kMinRoughness);
  const double al_b = std::max(f.alpha_b, kMinBandwidth);

  IntensityFields out;
  out.lambda = simulate_gp_field(w, h, {1.0, nu_l, al_l}, rng, entry_cap)
                   .array()
                   .exp();

  // All class fields share one (nu_b, alpha_b); factor the covariance once.
  const Matrix factor = gp_factor(w, h, {1.0, nu_b, al_b}, entry_cap);
  const int r_classes = static_cast<int>(f.beta.size());
  out.b.reserve(r_classes);
  for (int r = 0; r < r_classes; ++r)
    out.b.push_back((gp_draw(factor, rng).array() + f.beta[r]).exp());
  return out;
}

std::vector<CellRecord> sample_cells(const Vector& lambda,
                                     const std::vector<Vector>& b,
                                     const SourceFeatures& f, int w, int h,
                                     RngStream& rng) {
  if (f.n_cells < 1 || f.n_cells > 100000)
    throw ConfigError("sample_cells: n_cells out of [1, 1e5]");
  const int n_px = w * h;
  const int r_classes = static_cast<int>(b.size());

  Vector cdf(n_px);
  double acc = 0.0;
  for (int i = 0; i < n_px; ++i) {
    acc += lambda[i];
    cdf[i] = acc;
  }
  const double total = acc;

  std::vector<CellRecord> cells;
  cells.reserve(f.n_cells);
  std::vector<double> cls_w(r_classes);
  for (int c = 0; c < f.n_cells; ++c) {
    const double u = rng.uniform() * total;
    const int px = static_cast<int>(
        std::lower_bound(cdf.data(), cdf.data() + n_px, u) - cdf.data());
    const int pu = px % w, pv = px / w;

    double wsum = 0.0;
    for (int r = 0; r < r_classes; ++r) {
      cls_w[r] = std::pow(b[r][px], f.tau);
      wsum += cls_w[r];
    }
    const double uc = rng.uniform() * wsum;
    int cls = r_classes - 1;
    double cacc = 0.0;
    for (int r = 0; r < r_classes; ++r) {
      cacc += cls_w[r];
      if (uc < cacc) {
        cls = r;
        break;
      }
    }

    CellRecord rec;
    rec.x = (pu + rng.uniform()) / w;
    rec.y = (pv + rng.uniform()) / h;
    rec.cls = cls;
    rec.radius = rng.gamma(5.0, f.lambda_r[cls]);
    cells.push_back(rec);
  }
  return cells;
}

ImageTensor rasterize(const std::vector<CellRecord>& cells, int w, int h, int n_classes) {
  ImageTensor img(w, h, n_classes);
  for (const auto& cell : cells) {
    const double cx = cell.x * w;
    const double cy = cell.y * h;
    const double rad = cell.radius * w;  // radius scaled by width, per format
    const int u0 = std::max(0, static_cast<int>(std::floor(cx - rad - 1)));
    const int u1 = std::min(w - 1, static_cast<int>(std::ceil(cx + rad + 1)));
    const int v0 = std::max(0, static_cast<int>(std::floor(cy - rad - 1)));
    const int v1 = std::min(h - 1, static_cast<int>(std::ceil(cy + rad + 1)));
    const double r2 = rad * rad;
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const double dx = (u + 0.5) - cx;
        const double dy = (v + 0.5) - cy;
        if (dx * dx + dy * dy <= r2) img.at(u, v, cell.cls) = 1.0f;
      }
    }
  }
  return img;
}

std::vector<std::string> source_feature_names(int n_classes) {
  std::vector<std::string> names{"n_cells", "nu_lambda", "alpha_lambda"};
  for (int r = 1; r <= n_classes; ++r) names.push_back("beta_" + std::to_string(r));
  names.insert(names.end(), {"nu_b", "alpha_b", "tau"});
  for (int r = 1; r <= n_classes; ++r) names.push_back("lambda_" + std::to_string(r));
  return names;
}

Vector source_feature_row(const SourceFeatures& f) {
  const int r_classes = static_cast<int>(f.beta.size());
  Vector row(6 + 2 * r_classes);
  int k = 0;
  row[k++] = f.n_cells;
  row[k++] = f.nu_lambda;
  row[k++] = f.alpha_lambda;
  for (double beta : f.beta) row[k++] = beta;
  row[k++] = f.nu_b;
  row[k++] = f.alpha_b;
  row[k++] = f.tau;
  for (double lr : f.lambda_r) row[k++] = lr;
  return row;
}

Vector influence_vector(const SimConfig& cfg) {
  Vector infl(6 + 2 * cfg.n_classes);
  int k = 0;
  infl[k++] = cfg.infl_n_cells;
  infl[k++] = cfg.infl_nu_lambda;
  infl[k++] = cfg.infl_alpha_lambda;
  for (int r = 0; r < cfg.n_classes; ++r)
    infl[k++] = (r == 0) ? cfg.infl_beta_first : cfg.infl_beta_rest;
  infl[k++] = cfg.infl_nu_b;
  infl[k++] = cfg.infl_alpha_b;
  infl[k++] = cfg.infl_tau;
  for (int r = 0; r < cfg.n_classes; ++r)
    infl[k++] = (r == 0) ? cfg.infl_lambda_first : cfg.infl_lambda_rest;
  return infl;
}

void generate_response(std::vector<SourceFeatures>& table, const Vector& influences) {
  const int n = static_cast<int>(table.size());
  if (n < 2) throw DataError("generate_response: need at least 2 samples");
  const int p = static_cast<int>(influences.size());

  Matrix feats(n, p);
  for (int i = 0; i < n; ++i) {
    Vector row = source_feature_row(table[i]);
    if (row.size() != p)
      throw DataError("generate_response: feature/influence length mismatch");
    feats.row(i) = row.transpose();
  }

  const Vector mean = feats.colwise().mean();
  Vector sd(p);
  for (int j = 0; j < p; ++j) {
    const double var = (feats.col(j).array() - mean[j]).square().sum() / (n - 1);
    sd[j] = std::sqrt(var);
  }

  for (int i = 0; i < n; ++i) {
    double y = 0.0;
    for (int j = 0; j < p; ++j) {
      if (sd[j] > 0.0) y += influences[j] * (feats(i, j) - mean[j]) / sd[j];
    }
    table[i].y = y;
  }
}

SourceFeatures draw_source_features(const SimConfig& cfg, RngStream& rng) {
  SourceFeatures f;
  f.n_cells = static_cast<int>(
      std::lround(rng.uniform(cfg.n_cells_range.lo, cfg.n_cells_range.hi)));
  f.nu_lambda = rng.uniform(cfg.nu_lambda_range.lo, cfg.nu_lambda_range.hi);
  f.alpha_lambda = rng.uniform(cfg.alpha_lambda_range.lo, cfg.alpha_lambda_range.hi);
  for (int r = 0; r < cfg.n_classes; ++r)
    f.beta.push_back(rng.uniform(cfg.beta_range.lo, cfg.beta_range.hi));
  f.nu_b = rng.uniform(cfg.nu_b_range.lo, cfg.nu_b_range.hi);
  f.alpha_b = rng.uniform(cfg.alpha_b_range.lo, cfg.alpha_b_range.hi);
  f.tau = rng.uniform(cfg.tau_range.lo, cfg.tau_range.hi);
  for (int r = 0; r < cfg.n_classes; ++r)
    f.lambda_r.push_back(rng.uniform(cfg.lambda_r_range.lo, cfg.lambda_r_range.hi));
  return f;
}

SimulatedImage simulate_image(const SimConfig& cfg, int index) {
  if (cfg.grid_w < 8 || cfg.grid_h < 8)
    throw ConfigError("simulate_image: grid must be at least 8x8");
  RngStream rng = RngStream(cfg.seed, 0x51AC0DEULL).substream(index);
  SourceFeatures f = draw_source_features(cfg, rng);
  IntensityFields fields =
      build_intensities(f, cfg.grid_w, cfg.grid_h, rng, cfg.field_entry_cap);
  std::vector<CellRecord> cells =
      sample_cells(fields.lambda, fields.b, f, cfg.grid_w, cfg.grid_h, rng);
  return {rasterize(cells, cfg.grid_w, cfg.grid_h, cfg.n_classes), f};
}

}  // namespace li
