#pragma once

#include <wlasso/bench/config.hpp>
#include <wlasso/glm.hpp>
#include <wlasso/rng.hpp>
#include <wlasso/simulate.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace wlasso::bench {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

struct CsvTable {
  Dataset data;
  std::vector<std::string> header;  // empty without a header row
};

/** Reads X and y from a comma-separated file whose last column is the response. */
inline CsvTable ingest_csv_table(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0, width = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_row(line);
    if (header && names.empty() && rows.empty()) {
      names = cells;
      width = cells.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw IngestionError(path + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                           " columns, expected " + std::to_string(width));
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      const std::string& cell = cells[c];
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw IngestionError(path + ": row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                             " is not a number: '" + cell + "'");
      if (!std::isfinite(v))
        throw IngestionError(path + ": row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                             " is not finite");
      row[c] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestionError(path + ": no data rows");
  if (width < 2) throw IngestionError(path + ": need at least one predictor column and the response");
  const Index n = static_cast<Index>(rows.size()), p = static_cast<Index>(width) - 1;
  Matrix x(n, p);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    y[i] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)];
  }
  return {Dataset(std::move(x), std::move(y)), std::move(names)};
}

inline Dataset ingest_csv(const std::string& path, bool header = false) { return ingest_csv_table(path, header).data; }

// Writes X and y with 17 significant digits; header names x1..xp,y.
inline void emit_csv(const Dataset& data, const std::string& path, bool header = false) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path + "'");
  if (header) {
    for (Index j = 0; j < data.p(); ++j) out << 'x' << (j + 1) << ',';
    out << "y\n";
  }
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.p(); ++j) out << detail::format_double(data.x()(i, j)) << ',';
    out << detail::format_double(data.y()[i]) << '\n';
  }
  if (!out) throw IngestionError("write failed for '" + path + "'");
}

// Rescales every nonzero column to |x_j|_2^2 = n.
inline Matrix standardize_columns(Matrix x) {
  const double root_n = std::sqrt(static_cast<double>(x.rows()));
  for (Index j = 0; j < x.cols(); ++j) {
    const double norm = x.col(j).norm();
    if (norm > 0.0) x.col(j) *= root_n / norm;
  }
  return x;
}

/** Design matrix from the design substream; fixed across replicates. */
inline Matrix make_design(const ExperimentConfig& cfg) {
  Matrix x;
  switch (cfg.design.kind) {
    case DesignKind::identity:
      if (cfg.n < cfg.p) throw DomainError("identity design needs n >= p");
      x = Matrix::Zero(cfg.n, cfg.p);
      x.topRows(cfg.p).setIdentity();
      break;
    case DesignKind::gaussian_iid:
    case DesignKind::gaussian_correlated: {
      const double rho = cfg.design.kind == DesignKind::gaussian_iid ? 0.0 : cfg.design.rho;
      const double innov = std::sqrt(1.0 - rho * rho);
      Philox4x32 rng(cfg.seed, kDesignStream);
      x.resize(cfg.n, cfg.p);
      for (Index i = 0; i < cfg.n; ++i) {
        x(i, 0) = rng.normal();
        for (Index j = 1; j < cfg.p; ++j) x(i, j) = rho * x(i, j - 1) + innov * rng.normal();
      }
      break;
    }
    case DesignKind::from_file: {
      Dataset file = ingest_csv(cfg.design.path, cfg.design.header);
      if ((cfg.n > 0 && cfg.n != file.n()) || (cfg.p > 0 && cfg.p != file.p()))
        throw IngestionError(cfg.design.path + ": file is " + std::to_string(file.n()) + " x " +
                             std::to_string(file.p()) + ", config asks for " + std::to_string(cfg.n) + " x " +
                             std::to_string(cfg.p));
      x = file.x();
      break;
    }
  }
  return cfg.standardize ? standardize_columns(std::move(x)) : x;
}

/** beta* with s0_size nonzeros at the first coordinates, magnitudes uniform in [beta_min, beta_max]. */
inline Vector make_target(const ExperimentConfig& cfg, Index p) {
  if (cfg.s0_size > p) throw DomainError("s0_size exceeds p");
  Philox4x32 rng(cfg.seed, kTargetStream);
  Vector beta = Vector::Zero(p);
  for (Index j = 0; j < cfg.s0_size; ++j) {
    const double mag = cfg.beta_min + (cfg.beta_max - cfg.beta_min) * rng.uniform();
    beta[j] = rng.bernoulli(0.5) ? mag : -mag;
  }
  return beta;
}

// Replicate k draws its response from substream k.
inline Dataset draw_replicate(const ExperimentConfig& cfg, const Matrix& x, const Vector& beta, std::uint64_t k) {
  Philox4x32 rng(cfg.seed, k);
  return Dataset(x, draw_response(cfg.glm_family(), x, beta, rng));
}

struct Synthetic {
  Dataset data;
  Vector beta_star;
};

/** Design, target and the replicate-0 response. */
inline Synthetic generate_synthetic(const ExperimentConfig& cfg) {
  cfg.validate();
  Matrix x = make_design(cfg);
  Vector beta = make_target(cfg, x.cols());
  Dataset d = draw_replicate(cfg, x, beta, 0);
  return {std::move(d), std::move(beta)};
}

}  // namespace wlasso::bench
