#include "hcmr/datasets.hpp"

#include "hcmr/error.hpp"
#include "hcmr/rule_io.hpp"

#include <random>
#include <sstream>

namespace hcmr {

Dataset Dataset::rows(const std::vector<Eigen::Index>& idx) const {
  Dataset d{ad::Matrix(static_cast<Eigen::Index>(idx.size()), inputs.cols()),
            ad::Matrix(static_cast<Eigen::Index>(idx.size()), labels.cols()),
            ad::Matrix(static_cast<Eigen::Index>(idx.size()), observed.cols())};
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto dst = static_cast<Eigen::Index>(r);
    d.inputs.row(dst) = inputs.row(idx[r]);
    d.labels.row(dst) = labels.row(idx[r]);
    d.observed.row(dst) = observed.row(idx[r]);
  }
  return d;
}

Dataset Dataset::head(Eigen::Index n) const {
  n = std::min(n, size());
  return Dataset{inputs.topRows(n), labels.topRows(n), observed.topRows(n)};
}

Dataset Dataset::tail_from(Eigen::Index start) const {
  const Eigen::Index n = std::max<Eigen::Index>(0, size() - start);
  return Dataset{inputs.bottomRows(n), labels.bottomRows(n), observed.bottomRows(n)};
}

Dataset Dataset::hide(const std::vector<int>& concepts) const {
  Dataset d = *this;
  for (int c : concepts) {
    if (c < 0 || c >= n_concepts()) throw ArgumentError("hide: concept index out of range");
    d.labels.col(c).setZero();
    d.observed.col(c).setZero();
  }
  return d;
}

void Dataset::validate() const {
  if (labels.rows() != inputs.rows() || observed.rows() != inputs.rows() || observed.cols() != labels.cols()) {
    throw ShapeError("dataset matrices disagree in shape");
  }
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    for (Eigen::Index c = 0; c < labels.cols(); ++c) {
      const double l = labels(r, c);
      const double o = observed(r, c);
      if ((l != 0.0 && l != 1.0) || (o != 0.0 && o != 1.0)) throw SchemaError("labels and mask must be 0/1");
      if (o == 0.0 && l != 0.0) throw SchemaError("unobserved labels must be stored as 0");
    }
  }
}

const std::array<std::array<int, 2>, kXorConcepts>& xor_structure() {
  static const std::array<std::array<int, 2>, kXorConcepts> s{
      {{-1, -1}, {-1, -1}, {0, 1}, {0, 2}, {1, 2}, {3, 4}, {0, 1}}};
  return s;
}

namespace {

double noisy_xor(bool a, bool b, double p_flip) { return a != b ? 1.0 : p_flip; }

}  // namespace

Dataset gen_synthetic_xor(const SyntheticXorSpec& spec, std::uint64_t seed) {
  if (spec.n_examples < 0 || spec.features_per_bit < 1 || spec.noise < 0.0) {
    throw ArgumentError("invalid synthetic XOR specification");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index n = spec.n_examples;
  const int f = spec.features_per_bit;
  Dataset d{ad::Matrix(n, 2 * f), ad::Matrix(n, kXorConcepts), ad::Matrix::Ones(n, kXorConcepts)};
  const auto& st = xor_structure();
  for (Eigen::Index r = 0; r < n; ++r) {
    const bool bits[2] = {coin(rng), coin(rng)};
    std::array<bool, kXorConcepts> c{};
    c[0] = bits[0] && unit(rng) < spec.p_digit;
    c[1] = bits[1] && unit(rng) < spec.p_digit;
    for (int i = 2; i < kXorConcepts; ++i) {
      c[static_cast<std::size_t>(i)] =
          unit(rng) < noisy_xor(c[static_cast<std::size_t>(st[static_cast<std::size_t>(i)][0])],
                                c[static_cast<std::size_t>(st[static_cast<std::size_t>(i)][1])], spec.p_flip);
    }
    for (int b = 0; b < 2; ++b) {
      for (int k = 0; k < f; ++k) d.inputs(r, b * f + k) = (bits[b] ? 1.0 : 0.0) + spec.noise * gauss(rng);
    }
    for (int i = 0; i < kXorConcepts; ++i) d.labels(r, i) = c[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  return d;
}

double XorBayesOracle::mean_accuracy_given_x() const {
  double s = 0.0;
  for (double a : accuracy_given_x) s += a;
  return s / kXorConcepts;
}

XorBayesOracle xor_bayes_oracle(const SyntheticXorSpec& spec) {
  XorBayesOracle o;
  const auto& st = xor_structure();
  for (int i = 2; i < kXorConcepts; ++i) {
    for (int ab = 0; ab < 4; ++ab) {
      o.conditional[static_cast<std::size_t>(i)][static_cast<std::size_t>(ab)] =
          noisy_xor((ab >> 1) & 1, ab & 1, spec.p_flip);
    }
  }
  auto cond = [&](int i, const std::array<bool, kXorConcepts>& c) {
    const auto& p = st[static_cast<std::size_t>(i)];
    return noisy_xor(c[static_cast<std::size_t>(p[0])], c[static_cast<std::size_t>(p[1])], spec.p_flip);
  };

  std::array<double, kXorConcepts> acc_x{};
  std::array<double, kXorConcepts> acc_xs{};
  std::array<double, kXorConcepts> acc_par{};
  for (int bits = 0; bits < 4; ++bits) {
    const bool b0 = (bits >> 1) & 1;
    const bool b1 = bits & 1;
    // Joint over all concept assignments given the bits.
    std::array<double, kXorConcepts> p1{};
    std::array<std::array<double, kXorConcepts>, 4> p1_src{};  // given (c0, c1)
    std::array<double, 4> p_src{};
    for (int a = 0; a < (1 << kXorConcepts); ++a) {
      std::array<bool, kXorConcepts> c{};
      for (int i = 0; i < kXorConcepts; ++i) c[static_cast<std::size_t>(i)] = (a >> i) & 1;
      double w = 1.0;
      const double q0 = b0 ? spec.p_digit : 0.0;
      const double q1 = b1 ? spec.p_digit : 0.0;
      w *= c[0] ? q0 : 1.0 - q0;
      w *= c[1] ? q1 : 1.0 - q1;
      for (int i = 2; i < kXorConcepts; ++i) {
        const double q = cond(i, c);
        w *= c[static_cast<std::size_t>(i)] ? q : 1.0 - q;
      }
      if (w == 0.0) continue;
      for (int i = 2; i < kXorConcepts; ++i) {
        const double q = cond(i, c);
        acc_par[static_cast<std::size_t>(i)] += 0.25 * w * std::max(q, 1.0 - q);
      }
      const int s = (c[0] ? 2 : 0) + (c[1] ? 1 : 0);
      p_src[static_cast<std::size_t>(s)] += w;
      for (int i = 0; i < kXorConcepts; ++i) {
        if (c[static_cast<std::size_t>(i)]) {
          p1[static_cast<std::size_t>(i)] += w;
          p1_src[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] += w;
        }
      }
    }
    for (int i = 0; i < kXorConcepts; ++i) {
      const double p = p1[static_cast<std::size_t>(i)];
      o.marginal_given_bits[static_cast<std::size_t>(i)][static_cast<std::size_t>(bits)] = p;
      acc_x[static_cast<std::size_t>(i)] += 0.25 * std::max(p, 1.0 - p);
      for (int s = 0; s < 4; ++s) {
        const double ps = p_src[static_cast<std::size_t>(s)];
        if (ps == 0.0) continue;
        const double q = p1_src[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] / ps;
        acc_xs[static_cast<std::size_t>(i)] += 0.25 * ps * std::max(q, 1.0 - q);
      }
    }
  }
  o.accuracy_given_x = acc_x;
  o.accuracy_given_x_and_sources = acc_xs;
  o.accuracy_given_parents = acc_par;
  o.accuracy_given_parents[0] = acc_x[0];
  o.accuracy_given_parents[1] = acc_x[1];
  return o;
}

Dataset gen_symbolic_addition(const SymbolicAdditionSpec& spec, std::uint64_t seed) {
  if (spec.n_examples < 0 || spec.noise < 0.0) throw ArgumentError("invalid symbolic addition specification");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> digit(0, 9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index n = spec.n_examples;
  Dataset d{ad::Matrix(n, 20), ad::Matrix::Zero(n, kAdditionConcepts), ad::Matrix::Ones(n, kAdditionConcepts)};
  for (Eigen::Index r = 0; r < n; ++r) {
    const int a = digit(rng);
    const int b = digit(rng);
    for (int k = 0; k < 20; ++k) {
      const bool hot = k == a || k == 10 + b;
      d.inputs(r, k) = (hot ? 1.0 : 0.0) + spec.noise * gauss(rng);
    }
    d.labels(r, a) = 1.0;
    d.labels(r, 10 + b) = 1.0;
    d.labels(r, 20 + a + b) = 1.0;
  }
  return d;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& t : out) {
    while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
    while (!t.empty() && (t.back() == ' ' || t.back() == '\t' || t.back() == '\r')) t.remove_suffix(1);
  }
  return out;
}

}  // namespace

Dataset parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  while (!lines.empty() && (lines.back().empty() || lines.back() == "\r")) lines.pop_back();
  if (lines.empty()) throw ParseError("empty CSV document", 1);

  const auto header = split_commas(lines[0]);
  int n_x = 0;
  int n_c = 0;
  for (std::size_t k = 0; k < header.size(); ++k) {
    const std::string expect_x = "x_" + std::to_string(n_x);
    const std::string expect_c = "c_" + std::to_string(n_c);
    if (n_c == 0 && header[k] == expect_x) {
      ++n_x;
    } else if (header[k] == expect_c) {
      ++n_c;
    } else {
      throw SchemaError("unexpected CSV header column '" + std::string(header[k]) + "'");
    }
  }
  if (n_c == 0) throw SchemaError("CSV header declares no concept columns");

  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  Dataset d{ad::Matrix(n, n_x), ad::Matrix::Zero(n, n_c), ad::Matrix::Zero(n, n_c)};
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t line_no = static_cast<std::size_t>(r) + 2;
    const auto cells = split_commas(lines[static_cast<std::size_t>(r) + 1]);
    if (cells.size() != header.size()) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " columns, found " + std::to_string(cells.size()));
    }
    for (int k = 0; k < n_x; ++k) {
      try {
        d.inputs(r, k) = parse_double(cells[static_cast<std::size_t>(k)]);
      } catch (const ParseError& e) {
        throw ParseError(e.what(), line_no);
      }
    }
    for (int c = 0; c < n_c; ++c) {
      const auto cell = cells[static_cast<std::size_t>(n_x + c)];
      if (cell == "1") {
        d.labels(r, c) = 1.0;
        d.observed(r, c) = 1.0;
      } else if (cell == "0") {
        d.observed(r, c) = 1.0;
      } else if (cell != "?") {
        throw ParseError("concept cell must be 0, 1 or ?, found '" + std::string(cell) + "'", line_no);
      }
    }
  }
  return d;
}

Dataset load_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

std::string to_csv(const Dataset& data) {
  std::ostringstream os;
  for (int k = 0; k < data.input_dim(); ++k) os << (k ? "," : "") << "x_" << k;
  for (int c = 0; c < data.n_concepts(); ++c) os << (data.input_dim() + c ? "," : "") << "c_" << c;
  os << '\n';
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (int k = 0; k < data.input_dim(); ++k) os << (k ? "," : "") << format_double(data.inputs(r, k));
    for (int c = 0; c < data.n_concepts(); ++c) {
      os << (data.input_dim() + c ? "," : "");
      if (data.observed(r, c) == 0.0) os << '?';
      else os << (data.labels(r, c) != 0.0 ? '1' : '0');
    }
    os << '\n';
  }
  return os.str();
}

void save_csv(const std::filesystem::path& path, const Dataset& data) { write_text_file(path, to_csv(data)); }

}  // namespace hcmr
