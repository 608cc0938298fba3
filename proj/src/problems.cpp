#include "lrmc/problems.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "lrmc/errors.hpp"
#include "lrmc/matops.hpp"
#include "lrmc/rng.hpp"

namespace lrmc {

namespace {

// One stream per generated artifact so changing alpha never perturbs the
// mask, and changing p never perturbs the factors.
constexpr std::uint64_t kFactorStream = 1;
constexpr std::uint64_t kMaskStream = 2;
constexpr std::uint64_t kSupportStream = 3;
constexpr std::uint64_t kMagnitudeStream = 4;

constexpr char kObservedMagic[8] = {'L', 'R', 'M', 'C', 'O', 'B', 'S', '1'};
constexpr char kFactorsMagic[8] = {'L', 'R', 'M', 'C', 'T', 'R', 'U', '1'};
constexpr char kSparseMagic[8] = {'L', 'R', 'M', 'C', 'S', 'P', 'A', '1'};
constexpr char kDenseMagic[8] = {'L', 'R', 'M', 'C', 'M', 'A', 'T', '1'};

void check_rate(double p) {
  if (!(p > 0.0 && p <= 1.0))
    throw InvalidParameterError("sampling rate p must lie in (0, 1]");
}

DenseMatrix gaussian_factor(Index rows, int rank, RandomStream& rng) {
  DenseMatrix M(rows, rank);
  for (Index i = 0; i < rows; ++i)
    for (int k = 0; k < rank; ++k) M(i, k) = rng.normal();
  return M;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in)
    throw FormatError(path + ": truncated while reading " + what);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for reading");
  return in;
}

void expect_magic(std::ifstream& in, const std::string& path,
                  const char (&magic)[8]) {
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0)
    throw FormatError(path + ": bad or missing file magic");
}

}  // namespace

IndexSet bernoulli_mask(Index n1, Index n2, double p, std::uint64_t seed) {
  check_rate(p);
  if (n1 <= 0 || n2 <= 0)
    throw InvalidShapeError("bernoulli_mask: shape must be positive");
  RandomStream rng(seed, kMaskStream);
  std::vector<Coord> entries;
  entries.reserve(static_cast<std::size_t>(
      p * static_cast<double>(n1) * static_cast<double>(n2) * 1.05) + 16);
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j)
      if (rng.next_double() < p)
        entries.push_back({static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(j)});
  return IndexSet::from_sorted_unique(std::move(entries), n1, n2);
}

SyntheticInstance generate_synthetic(Index n1, Index n2, int rank, double p,
                                     double alpha, std::uint64_t seed) {
  check_rate(p);
  if (rank <= 0 || rank > std::min(n1, n2))
    throw InvalidParameterError("generate_synthetic: rank out of range");
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw InvalidParameterError("generate_synthetic: alpha must lie in [0, 1)");

  RandomStream factor_rng(seed, kFactorStream);
  DenseMatrix Lstar = gaussian_factor(n1, rank, factor_rng);
  DenseMatrix Rstar = gaussian_factor(n2, rank, factor_rng);

  IndexSet omega = bernoulli_mask(n1, n2, p, seed);
  const std::size_t m = omega.size();

  // Empirical mean |X*| over all n1*n2 entries, streamed.
  double abs_sum = 0.0;
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j)
      abs_sum += std::abs(product_entry(Lstar, i, Rstar, j));
  const double mean_abs =
      abs_sum / (static_cast<double>(n1) * static_cast<double>(n2));

  // Outlier support: floor(alpha |Omega|) positions without replacement.
  const std::size_t n_out =
      static_cast<std::size_t>(alpha * static_cast<double>(m));
  std::vector<std::uint32_t> picks;
  if (n_out > 0) {
    RandomStream support_rng(seed, kSupportStream);
    std::vector<std::uint32_t> pool(m);
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t i = 0; i < n_out; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(support_rng.below(m - i));
      std::swap(pool[i], pool[j]);
    }
    picks.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_out));
    std::sort(picks.begin(), picks.end());
  }

  std::vector<Coord> out_coords(picks.size());
  for (std::size_t k = 0; k < picks.size(); ++k)
    out_coords[k] = omega[picks[k]];

  Vector out_values(static_cast<Index>(picks.size()));
  {
    RandomStream mag_rng(seed, kMagnitudeStream);
    for (Index k = 0; k < out_values.size(); ++k)
      out_values[k] = mag_rng.uniform(-mean_abs, mean_abs);
  }

  SparseEstimate Sstar{
      IndexSet::from_sorted_unique(std::move(out_coords), n1, n2),
      std::move(out_values)};

  // Y on Omega: X* everywhere, plus S* on its support.
  auto support = std::make_shared<const IndexSet>(std::move(omega));
  Vector y(static_cast<Index>(m));
  for (std::size_t e = 0; e < m; ++e) {
    const Coord c = (*support)[e];
    y[static_cast<Index>(e)] = product_entry(Lstar, c.row, Rstar, c.col);
  }
  for (std::size_t k = 0; k < picks.size(); ++k)
    y[static_cast<Index>(picks[k])] += Sstar.values[static_cast<Index>(k)];

  SyntheticInstance inst;
  inst.observed.data = MaskedMatrix(support, std::move(y));
  inst.observed.p = static_cast<double>(m) /
                    (static_cast<double>(n1) * static_cast<double>(n2));
  inst.truth = make_ground_truth(std::move(Lstar), std::move(Rstar),
                                 std::move(Sstar));
  inst.truth.alpha = alpha;
  inst.seed = seed;
  return inst;
}

IncoherenceStats incoherence(const DenseMatrix& L, const DenseMatrix& R) {
  if (L.cols() != R.cols())
    throw InvalidShapeError("incoherence: factor rank mismatch");
  const Index r = L.cols();
  const Index n1 = L.rows(), n2 = R.rows();
  if (r <= 0 || r > std::min(n1, n2))
    throw InvalidRankError("incoherence: rank out of range");

  Eigen::HouseholderQR<Eigen::MatrixXd> qrL(L);
  Eigen::HouseholderQR<Eigen::MatrixXd> qrR(R);
  const Eigen::MatrixXd QL =
      qrL.householderQ() * Eigen::MatrixXd::Identity(n1, r);
  const Eigen::MatrixXd QR =
      qrR.householderQ() * Eigen::MatrixXd::Identity(n2, r);
  const Eigen::MatrixXd TL =
      qrL.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd TR =
      qrR.matrixQR().topRows(r).triangularView<Eigen::Upper>();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      TL * TR.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector sigma = svd.singularValues();
  if (!(sigma[r - 1] > 0.0) || sigma[r - 1] < sigma[0] * 1e-12)
    throw InvalidRankError("incoherence: product L R^T is rank-deficient");

  const Eigen::MatrixXd U = QL * svd.matrixU();
  const Eigen::MatrixXd V = QR * svd.matrixV();
  const double urow = U.rowwise().squaredNorm().maxCoeff();
  const double vrow = V.rowwise().squaredNorm().maxCoeff();

  IncoherenceStats st;
  st.mu = std::max(static_cast<double>(n1) * urow,
                   static_cast<double>(n2) * vrow) /
          static_cast<double>(r);
  st.kappa = sigma[0] / sigma[r - 1];
  st.sigma_r = sigma[r - 1];
  return st;
}

GroundTruth make_ground_truth(DenseMatrix Lstar, DenseMatrix Rstar,
                              SparseEstimate Sstar) {
  GroundTruth t;
  const IncoherenceStats st = incoherence(Lstar, Rstar);
  t.sigma_r = st.sigma_r;
  t.kappa = st.kappa;
  t.mu = st.mu;

  const Index n1 = Lstar.rows(), n2 = Rstar.rows();
  std::vector<std::uint32_t> row_counts(static_cast<std::size_t>(n1), 0);
  std::vector<std::uint32_t> col_counts(static_cast<std::size_t>(n2), 0);
  for (const Coord& c : Sstar.support.entries()) {
    ++row_counts[c.row];
    ++col_counts[c.col];
  }
  double frac = 0.0;
  for (Index i = 0; i < n1; ++i)
    frac = std::max(frac, static_cast<double>(row_counts[i]) /
                              static_cast<double>(n2));
  for (Index j = 0; j < n2; ++j)
    frac = std::max(frac, static_cast<double>(col_counts[j]) /
                              static_cast<double>(n1));
  t.alpha_rowcol = frac;
  t.alpha = Sstar.support.empty()
                ? 0.0
                : static_cast<double>(Sstar.support.size()) /
                      (static_cast<double>(n1) * static_cast<double>(n2));
  t.Lstar = std::move(Lstar);
  t.Rstar = std::move(Rstar);
  t.Sstar = std::move(Sstar);
  return t;
}

DenseMatrix load_dense(const std::string& path) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw FormatError(path + ": cannot open for reading");
    char magic[8] = {};
    probe.read(magic, 8);
    if (probe.gcount() == 8 && std::memcmp(magic, kDenseMagic, 8) == 0) {
      std::ifstream in = open_in(path);
      expect_magic(in, path, kDenseMagic);
      const auto n1 = read_pod<std::uint32_t>(in, path, "row count");
      const auto n2 = read_pod<std::uint32_t>(in, path, "column count");
      DenseMatrix M(static_cast<Index>(n1), static_cast<Index>(n2));
      in.read(reinterpret_cast<char*>(M.data()),
              static_cast<std::streamsize>(sizeof(double)) * M.size());
      if (!in) throw FormatError(path + ": truncated matrix payload");
      if (!M.allFinite())
        throw FormatError(path + ": matrix contains non-finite values");
      return M;
    }
  }

  std::ifstream in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      const std::string field = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0')
        throw FormatError(path + ":" + std::to_string(lineno) + ": column " +
                          std::to_string(row.size() + 1) +
                          ": cannot parse '" + field + "' as a number");
      row.push_back(v);
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": ragged row (expected " +
                        std::to_string(rows.front().size()) + " columns, got " +
                        std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path + ": no rows");
  DenseMatrix M(static_cast<Index>(rows.size()),
                static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j)
      M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  if (!M.allFinite())
    throw FormatError(path + ": matrix contains non-finite values");
  return M;
}

void save_dense_csv(const std::string& path, const DenseMatrix& M) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open for writing");
  char buf[32];
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", M(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void save_dense_binary(const std::string& path, const DenseMatrix& M) {
  std::ofstream out = open_out(path);
  out.write(kDenseMagic, 8);
  write_pod(out, static_cast<std::uint32_t>(M.rows()));
  write_pod(out, static_cast<std::uint32_t>(M.cols()));
  out.write(reinterpret_cast<const char*>(M.data()),
            static_cast<std::streamsize>(sizeof(double)) * M.size());
}

ObservedMatrix subsample(const DenseMatrix& M, double p, std::uint64_t seed) {
  IndexSet omega = bernoulli_mask(M.rows(), M.cols(), p, seed);
  const std::size_t m = omega.size();
  auto support = std::make_shared<const IndexSet>(std::move(omega));
  Vector vals(static_cast<Index>(m));
  for (std::size_t e = 0; e < m; ++e) {
    const Coord c = (*support)[e];
    vals[static_cast<Index>(e)] = M(c.row, c.col);
  }
  ObservedMatrix out;
  out.data = MaskedMatrix(support, std::move(vals));
  out.p = static_cast<double>(m) /
          (static_cast<double>(M.rows()) * static_cast<double>(M.cols()));
  return out;
}

ObservedMatrix observe_all(const DenseMatrix& M) {
  auto support =
      std::make_shared<const IndexSet>(IndexSet::all(M.rows(), M.cols()));
  Vector vals(static_cast<Index>(support->size()));
  for (std::size_t e = 0; e < support->size(); ++e) {
    const Coord c = (*support)[e];
    vals[static_cast<Index>(e)] = M(c.row, c.col);
  }
  ObservedMatrix out;
  out.data = MaskedMatrix(support, std::move(vals));
  out.p = 1.0;
  return out;
}

void save_observed(const std::string& path, const ObservedMatrix& Y) {
  std::ofstream out = open_out(path);
  out.write(kObservedMagic, 8);
  write_pod(out, static_cast<std::uint32_t>(Y.rows()));
  write_pod(out, static_cast<std::uint32_t>(Y.cols()));
  write_pod(out, static_cast<std::uint64_t>(Y.support().size()));
  write_pod(out, Y.p);
  const auto& entries = Y.support().entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    write_pod(out, entries[e].row);
    write_pod(out, entries[e].col);
    write_pod(out, Y.data.values()[static_cast<Index>(e)]);
  }
}

ObservedMatrix load_observed(const std::string& path) {
  std::ifstream in = open_in(path);
  expect_magic(in, path, kObservedMagic);
  const auto n1 = read_pod<std::uint32_t>(in, path, "row count");
  const auto n2 = read_pod<std::uint32_t>(in, path, "column count");
  const auto m = read_pod<std::uint64_t>(in, path, "entry count");
  const auto p = read_pod<double>(in, path, "sampling rate");
  std::vector<Coord> coords(m);
  Vector vals(static_cast<Index>(m));
  for (std::uint64_t e = 0; e < m; ++e) {
    coords[e].row = read_pod<std::uint32_t>(in, path, "entry row");
    coords[e].col = read_pod<std::uint32_t>(in, path, "entry column");
    vals[static_cast<Index>(e)] = read_pod<double>(in, path, "entry value");
  }
  ObservedMatrix out;
  out.data = MaskedMatrix(
      std::make_shared<const IndexSet>(
          IndexSet(std::move(coords), static_cast<Index>(n1),
                   static_cast<Index>(n2))),
      std::move(vals));
  out.p = p;
  if (!(p > 0.0 && p <= 1.0))
    throw FormatError(path + ": sampling rate outside (0, 1]");
  return out;
}

void save_factors(const std::string& path, const DenseMatrix& L,
                  const DenseMatrix& R) {
  if (L.cols() != R.cols())
    throw InvalidShapeError("save_factors: factor rank mismatch");
  std::ofstream out = open_out(path);
  out.write(kFactorsMagic, 8);
  write_pod(out, static_cast<std::uint32_t>(L.rows()));
  write_pod(out, static_cast<std::uint32_t>(R.rows()));
  write_pod(out, static_cast<std::uint32_t>(L.cols()));
  out.write(reinterpret_cast<const char*>(L.data()),
            static_cast<std::streamsize>(sizeof(double)) * L.size());
  out.write(reinterpret_cast<const char*>(R.data()),
            static_cast<std::streamsize>(sizeof(double)) * R.size());
}

std::pair<DenseMatrix, DenseMatrix> load_factors(const std::string& path) {
  std::ifstream in = open_in(path);
  expect_magic(in, path, kFactorsMagic);
  const auto n1 = read_pod<std::uint32_t>(in, path, "row count");
  const auto n2 = read_pod<std::uint32_t>(in, path, "column count");
  const auto r = read_pod<std::uint32_t>(in, path, "rank");
  DenseMatrix L(static_cast<Index>(n1), static_cast<Index>(r));
  DenseMatrix R(static_cast<Index>(n2), static_cast<Index>(r));
  in.read(reinterpret_cast<char*>(L.data()),
          static_cast<std::streamsize>(sizeof(double)) * L.size());
  in.read(reinterpret_cast<char*>(R.data()),
          static_cast<std::streamsize>(sizeof(double)) * R.size());
  if (!in) throw FormatError(path + ": truncated factor payload");
  return {std::move(L), std::move(R)};
}

void save_sparse(const std::string& path, const SparseEstimate& S) {
  std::ofstream out = open_out(path);
  out.write(kSparseMagic, 8);
  write_pod(out, static_cast<std::uint32_t>(S.rows()));
  write_pod(out, static_cast<std::uint32_t>(S.cols()));
  write_pod(out, static_cast<std::uint64_t>(S.support.size()));
  const auto& entries = S.support.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    write_pod(out, entries[e].row);
    write_pod(out, entries[e].col);
    write_pod(out, S.values[static_cast<Index>(e)]);
  }
}

SparseEstimate load_sparse(const std::string& path) {
  std::ifstream in = open_in(path);
  expect_magic(in, path, kSparseMagic);
  const auto n1 = read_pod<std::uint32_t>(in, path, "row count");
  const auto n2 = read_pod<std::uint32_t>(in, path, "column count");
  const auto m = read_pod<std::uint64_t>(in, path, "entry count");
  std::vector<Coord> coords(m);
  Vector vals(static_cast<Index>(m));
  for (std::uint64_t e = 0; e < m; ++e) {
    coords[e].row = read_pod<std::uint32_t>(in, path, "entry row");
    coords[e].col = read_pod<std::uint32_t>(in, path, "entry column");
    vals[static_cast<Index>(e)] = read_pod<double>(in, path, "entry value");
  }
  SparseEstimate out;
  out.support = IndexSet(std::move(coords), static_cast<Index>(n1),
                         static_cast<Index>(n2));
  out.values = std::move(vals);
  return out;
}

}  // namespace lrmc
