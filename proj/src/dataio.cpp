#include "pfeddl/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pfeddl::io {
namespace fs = std::filesystem;

namespace {

constexpr double kCorrelationClamp = 1e-7;
constexpr int kMaxMarginAttempts = 10000;

Matrix random_unit_columns(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    m.col(j).normalize();
  }
  return m;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Splits a line into tokens, remembering the 1-based column of each.
struct Token {
  std::string_view text;
  std::size_t column;
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    if (i >= line.size()) break;
    std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

double parse_double(const Token& tok, std::size_t line) {
  double value = 0.0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  if (!tok.text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("invalid number '" + std::string(tok.text) + "'", line, tok.column);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite value '" + std::string(tok.text) + "'", line, tok.column);
  }
  return value;
}

long long parse_integer(const Token& tok, std::size_t line) {
  long long value = 0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("invalid integer '" + std::string(tok.text) + "'", line, tok.column);
  }
  return value;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid synthetic spec: " + what); };
  if (d < 1 || k_true < 1 || sites < 1) fail("d, k_true and sites must be positive");
  if (g_true < 0 || g_true > k_true) fail("g_true must satisfy 0 <= g_true <= k_true");
  if (static_cast<Index>(samples_per_site.size()) != sites) {
    fail("samples_per_site lists " + std::to_string(samples_per_site.size()) + " sites, expected " +
         std::to_string(sites));
  }
  for (Index n : samples_per_site) {
    if (n < 1) fail("every site needs at least one sample");
  }
  if (sparsity < 1 || sparsity > k_true) fail("sparsity must satisfy 1 <= sparsity <= k_true");
  if (!(noise_std >= 0.0)) fail("noise_std must be nonnegative");
  if (!(margin >= 0.0)) fail("margin must be nonnegative");
}

Matrix GroundTruth::site_dictionary(std::size_t site) const {
  const Matrix& local = local_atoms.at(site);
  Matrix out(global_atoms.rows(), global_atoms.cols() + local.cols());
  out << global_atoms, local;
  return out;
}

SyntheticFederation generate_synthetic_federation(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, 0x51u);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticFederation fed;
  GroundTruth& truth = fed.truth;
  truth.global_atoms = random_unit_columns(spec.d, spec.g_true, rng);

  const Index k = spec.k_true;
  for (Index site = 0; site < spec.sites; ++site) {
    truth.local_atoms.push_back(random_unit_columns(spec.d, k - spec.g_true, rng));
    const Matrix dict = truth.site_dictionary(static_cast<std::size_t>(site));

    // Planted direction: random signs over the global atoms (all atoms when
    // there is no global block), unit norm.
    const Index pool = spec.g_true > 0 ? spec.g_true : k;
    Vector direction = Vector::Zero(k);
    for (Index j = 0; j < pool; ++j) direction(j) = unit(rng) < 0.5 ? -1.0 : 1.0;
    direction /= std::sqrt(static_cast<double>(pool));

    const Index n = spec.samples_per_site[static_cast<std::size_t>(site)];
    std::vector<Index> atoms(static_cast<std::size_t>(k));
    std::iota(atoms.begin(), atoms.end(), Index{0});

    SparseCode codes = SparseCode::Zero(k, n);
    std::vector<int> labels(static_cast<std::size_t>(n));
    Vector code(k);
    for (Index a = 0; a < n; ++a) {
      // Redraw until the planted score clears the margin.
      double score = 0.0;
      for (int attempt = 0;; ++attempt) {
        if (attempt == kMaxMarginAttempts) {
          throw ConfigError("synthetic spec: margin " + std::to_string(spec.margin) +
                            " is unreachable with sparsity " + std::to_string(spec.sparsity));
        }
        code.setZero();
        // Partial Fisher-Yates draw of the support.
        for (Index t = 0; t < spec.sparsity; ++t) {
          const Index pick = std::uniform_int_distribution<Index>(t, k - 1)(rng);
          std::swap(atoms[static_cast<std::size_t>(t)], atoms[static_cast<std::size_t>(pick)]);
          const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
          code(atoms[static_cast<std::size_t>(t)]) = sign * (0.5 + unit(rng));
        }
        score = direction.dot(code);
        if (std::abs(score) >= spec.margin && score != 0.0) break;
      }
      codes.col(a) = code;
      labels[static_cast<std::size_t>(a)] = score > 0.0 ? 1 : 0;
    }

    Matrix X = dict * codes;
    if (spec.noise_std > 0.0) {
      for (Index j = 0; j < X.cols(); ++j) {
        for (Index i = 0; i < X.rows(); ++i) X(i, j) += spec.noise_std * normal(rng);
      }
    }

    fed.sites.push_back({std::move(X), Labels(std::move(labels))});
    truth.codes.push_back(std::move(codes));
    truth.classifier_directions.push_back(std::move(direction));
  }
  return fed;
}

Vector pearson_fisher_features(const Matrix& timeseries) {
  const Index m = timeseries.rows();
  const Index T = timeseries.cols();
  if (T < 3) {
    throw ShapeError("pearson_fisher_features: need at least 3 time points, got " +
                     std::to_string(T));
  }
  if (!timeseries.allFinite()) throw DegenerateInputError("time series contains non-finite values");

  Matrix centered = timeseries.colwise() - timeseries.rowwise().mean();
  Vector norms = centered.rowwise().norm();
  for (Index r = 0; r < m; ++r) {
    if (!(norms(r) > 0.0)) {
      throw DegenerateInputError("ROI row " + std::to_string(r) +
                                 " has zero variance; Pearson correlation undefined");
    }
    centered.row(r) /= norms(r);
  }
  const Matrix corr = centered * centered.transpose();
  const double hi = 1.0 - kCorrelationClamp;
  const Matrix z = corr.unaryExpr([hi](double r) { return std::atanh(std::clamp(r, -hi, hi)); });
  return vectorize_lower_triangle(z);
}

Vector vectorize_lower_triangle(const Matrix& symmetric) {
  const Index m = symmetric.rows();
  if (symmetric.cols() != m) {
    throw ShapeError("vectorize_lower_triangle: matrix must be square, got " +
                     detail::shape_str(symmetric));
  }
  Vector out(m * (m - 1) / 2);
  Index pos = 0;
  for (Index j = 0; j < m; ++j) {
    for (Index i = j + 1; i < m; ++i) out(pos++) = symmetric(i, j);
  }
  return out;
}

Matrix devectorize_lower_triangle(const Vector& features, Index roi_count) {
  const Index m = roi_count;
  if (m < 0 || features.size() != m * (m - 1) / 2) {
    throw ShapeError("devectorize_lower_triangle: length " + std::to_string(features.size()) +
                     " does not match m(m-1)/2 for m=" + std::to_string(m));
  }
  Matrix out = Matrix::Zero(m, m);
  Index pos = 0;
  for (Index j = 0; j < m; ++j) {
    for (Index i = j + 1; i < m; ++i) {
      out(i, j) = features(pos);
      out(j, i) = features(pos);
      ++pos;
    }
  }
  return out;
}

std::optional<Index> roi_count_for_length(Index length) {
  if (length < 0) return std::nullopt;
  // m = (1 + sqrt(1 + 8L)) / 2, then confirm exactly in integers.
  auto m = static_cast<Index>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(length))) / 2.0));
  for (Index cand = std::max<Index>(m - 1, 1); cand <= m + 1; ++cand) {
    if (cand * (cand - 1) / 2 == length) return cand;
  }
  return std::nullopt;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line.push_back(' ');
      line += format_double(m(i, j));
    }
    line.push_back('\n');
    out << line;
  }
}

Matrix read_matrix(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty input, expected 'rows cols' header", 1, 1);
  ++line_no;
  const auto header = tokenize(line);
  if (header.size() != 2) {
    throw ParseError("header must contain exactly two integers 'rows cols'", line_no,
                     header.empty() ? 1 : header.front().column);
  }
  const long long rows = parse_integer(header[0], line_no);
  const long long cols = parse_integer(header[1], line_no);
  if (rows < 0 || cols < 0) throw ParseError("negative dimension in header", line_no, 1);

  Matrix m(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw FormatError("header declares " + std::to_string(rows) + " rows but only " +
                            std::to_string(i) + " present",
                        line_no + 1);
    }
    ++line_no;
    const auto toks = tokenize(line);
    if (static_cast<long long>(toks.size()) != cols) {
      throw FormatError("row has " + std::to_string(toks.size()) + " values, header declares " +
                            std::to_string(cols) + " columns",
                        line_no);
    }
    for (long long j = 0; j < cols; ++j) m(i, j) = parse_double(toks[static_cast<std::size_t>(j)], line_no);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!tokenize(line).empty()) {
      throw FormatError("unexpected content after " + std::to_string(rows) + " declared rows",
                        line_no);
    }
  }
  return m;
}

void save_matrix(const fs::path& path, const Matrix& m) {
  auto out = open_output(path);
  write_matrix(out, m);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Matrix load_matrix(const fs::path& path) {
  auto in = open_input(path);
  try {
    return read_matrix(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line(), e.column());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.line());
  }
}

void write_labels(std::ostream& out, const Labels& labels) {
  for (int y : labels.values()) out << y << '\n';
}

Labels read_labels(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<int> values;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != 1) throw FormatError("expected one label per line", line_no);
    const long long v = parse_integer(toks[0], line_no);
    if (v != 0 && v != 1) throw ParseError("label must be 0 or 1", line_no, toks[0].column);
    values.push_back(static_cast<int>(v));
  }
  if (values.empty()) throw ParseError("empty label file", 1, 1);
  return Labels(std::move(values));
}

void save_labels(const fs::path& path, const Labels& labels) {
  auto out = open_output(path);
  write_labels(out, labels);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Labels load_labels(const fs::path& path) {
  auto in = open_input(path);
  try {
    return read_labels(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line(), e.column());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.line());
  }
}

SiteInput load_site_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("site directory '" + dir.string() + "' not found");
  const fs::path labels_path = dir / "Y.txt";
  if (!fs::exists(labels_path)) throw IoError("missing label file '" + labels_path.string() + "'");

  SiteInput site;
  const fs::path x_path = dir / "X.txt";
  if (fs::exists(x_path)) {
    site.X = load_matrix(x_path);
  } else {
    std::vector<fs::path> series;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.rfind("timeseries_", 0) == 0) series.push_back(entry.path());
    }
    if (series.empty()) {
      throw IoError("site directory '" + dir.string() +
                    "' has neither X.txt nor timeseries_*.txt files (missing '" + x_path.string() + "')");
    }
    std::sort(series.begin(), series.end());
    for (std::size_t a = 0; a < series.size(); ++a) {
      Vector v;
      try {
        v = pearson_fisher_features(load_matrix(series[a]));
      } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(series[a].string() + ": " + e.what());
      }
      if (a == 0) site.X.resize(v.size(), static_cast<Index>(series.size()));
      if (v.size() != site.X.rows()) {
        throw ShapeError(series[a].string() + ": ROI count differs from earlier subjects");
      }
      site.X.col(static_cast<Index>(a)) = v;
    }
  }
  site.Y = load_labels(labels_path);
  if (site.Y.size() != site.X.cols()) {
    throw ShapeError("site '" + dir.string() + "': " + std::to_string(site.X.cols()) +
                     " samples but " + std::to_string(site.Y.size()) + " labels");
  }
  return site;
}

void save_ground_truth(const fs::path& dir, const GroundTruth& truth) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  save_matrix(dir / "global_atoms.txt", truth.global_atoms);
  for (std::size_t i = 0; i < truth.local_atoms.size(); ++i) {
    const std::string n = std::to_string(i);
    save_matrix(dir / ("local_atoms_" + n + ".txt"), truth.local_atoms[i]);
    save_matrix(dir / ("codes_" + n + ".txt"), truth.codes.at(i));
    save_matrix(dir / ("direction_" + n + ".txt"), truth.classifier_directions.at(i));
  }
}

GroundTruth load_ground_truth(const fs::path& dir) {
  GroundTruth truth;
  truth.global_atoms = load_matrix(dir / "global_atoms.txt");
  for (std::size_t i = 0;; ++i) {
    const std::string n = std::to_string(i);
    const fs::path local = dir / ("local_atoms_" + n + ".txt");
    if (!fs::exists(local)) break;
    truth.local_atoms.push_back(load_matrix(local));
    truth.codes.push_back(load_matrix(dir / ("codes_" + n + ".txt")));
    truth.classifier_directions.push_back(load_matrix(dir / ("direction_" + n + ".txt")).col(0));
  }
  return truth;
}

}  // namespace pfeddl::io
