#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "shillbench/recommender.hpp"

namespace shillbench {
namespace {

constexpr const char* kEmbeddingMagic = "shillbench-embedding-model";
constexpr const char* kKnnMagic = "shillbench-itemknn-model";
constexpr int kVersion = 1;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_row(std::ostream& out, const auto& row) {
  for (Eigen::Index c = 0; c < row.size(); ++c) out << (c ? " " : "") << num(row[c]);
  out << '\n';
}

void expect(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) throw DataError("model dump: expected '" + word + "', got '" + got + "'");
}

template <typename T>
T read(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw DataError(std::string("model dump: cannot read ") + what);
  return v;
}

void read_header(std::istream& in, const char* magic) {
  expect(in, magic);
  const int version = read<int>(in, "version");
  if (version != kVersion) throw DataError("model dump: unsupported version " + std::to_string(version));
}

}  // namespace

void save_model(std::ostream& out, const EmbeddingModel& m) {
  out << kEmbeddingMagic << ' ' << kVersion << '\n';
  out << "form " << (m.form == ScoreForm::kPointwise ? "pointwise" : "dot") << '\n';
  out << "bounds " << num(m.bounds.min) << ' ' << num(m.bounds.max) << '\n';
  out << "global_mean " << num(m.global_mean) << '\n';
  out << "shape " << m.n_users() << ' ' << m.n_items() << ' ' << m.dim() << ' ' << m.n_layers << '\n';
  out << "user_bias\n";
  write_row(out, m.user_bias);
  out << "item_bias\n";
  write_row(out, m.item_bias);
  out << "user_factors\n";
  for (Eigen::Index r = 0; r < m.user_factors.rows(); ++r) write_row(out, m.user_factors.row(r));
  out << "item_factors\n";
  for (Eigen::Index r = 0; r < m.item_factors.rows(); ++r) write_row(out, m.item_factors.row(r));
  out << "adjacency " << m.norm_adjacency.nonZeros() << '\n';
  for (Eigen::Index r = 0; r < m.norm_adjacency.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m.norm_adjacency, r); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << num(it.value()) << '\n';
}

EmbeddingModel load_embedding_model(std::istream& in) {
  read_header(in, kEmbeddingMagic);
  EmbeddingModel m;
  expect(in, "form");
  const auto form = read<std::string>(in, "form");
  if (form == "pointwise")
    m.form = ScoreForm::kPointwise;
  else if (form == "dot")
    m.form = ScoreForm::kDot;
  else
    throw DataError("model dump: unknown form " + form);
  expect(in, "bounds");
  m.bounds.min = read<double>(in, "bounds");
  m.bounds.max = read<double>(in, "bounds");
  expect(in, "global_mean");
  m.global_mean = read<double>(in, "global_mean");
  expect(in, "shape");
  const auto nu = read<Eigen::Index>(in, "n_users");
  const auto ni = read<Eigen::Index>(in, "n_items");
  const auto d = read<Eigen::Index>(in, "dim");
  m.n_layers = read<int>(in, "n_layers");
  if (nu < 0 || ni < 0 || d < 1 || m.n_layers < 0) throw DataError("model dump: invalid shape");
  m.user_bias.resize(nu);
  m.item_bias.resize(ni);
  m.user_factors.resize(nu, d);
  m.item_factors.resize(ni, d);
  expect(in, "user_bias");
  for (Eigen::Index k = 0; k < nu; ++k) m.user_bias[k] = read<double>(in, "user_bias");
  expect(in, "item_bias");
  for (Eigen::Index k = 0; k < ni; ++k) m.item_bias[k] = read<double>(in, "item_bias");
  expect(in, "user_factors");
  for (Eigen::Index r = 0; r < nu; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m.user_factors(r, c) = read<double>(in, "user_factors");
  expect(in, "item_factors");
  for (Eigen::Index r = 0; r < ni; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m.item_factors(r, c) = read<double>(in, "item_factors");
  expect(in, "adjacency");
  const auto nnz = read<Eigen::Index>(in, "adjacency size");
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  for (Eigen::Index k = 0; k < nnz; ++k) {
    const auto r = read<Eigen::Index>(in, "adjacency row");
    const auto c = read<Eigen::Index>(in, "adjacency col");
    entries.emplace_back(r, c, read<double>(in, "adjacency value"));
  }
  if (m.n_layers > 0) {
    m.norm_adjacency.resize(nu + ni, nu + ni);
    m.norm_adjacency.setFromTriplets(entries.begin(), entries.end());
  }
  m.refresh();
  return m;
}

void save_model(std::ostream& out, const ItemKnnModel& m) {
  out << kKnnMagic << ' ' << kVersion << '\n';
  out << "shape " << m.n_users() << ' ' << m.n_items() << ' ' << m.k_neighbors() << '\n';
  for (std::size_t i = 0; i < m.n_items(); ++i) {
    const auto nb = m.neighbors(static_cast<ItemIndex>(i));
    out << "item " << nb.size();
    for (const auto& n : nb) out << ' ' << n.item << ' ' << num(n.similarity);
    out << '\n';
  }
  for (const auto& items : m.user_items()) {
    out << "user " << items.size();
    for (const auto i : items) out << ' ' << i;
    out << '\n';
  }
}

ItemKnnModel load_itemknn_model(std::istream& in) {
  read_header(in, kKnnMagic);
  expect(in, "shape");
  const auto nu = read<std::size_t>(in, "n_users");
  const auto ni = read<std::size_t>(in, "n_items");
  const auto k = read<int>(in, "k");
  std::vector<std::vector<ItemKnnModel::Neighbor>> neighbors(ni);
  for (auto& list : neighbors) {
    expect(in, "item");
    list.resize(read<std::size_t>(in, "neighbour count"));
    for (auto& n : list) {
      n.item = read<ItemIndex>(in, "neighbour");
      n.similarity = read<double>(in, "similarity");
    }
  }
  std::vector<std::vector<ItemIndex>> user_items(nu);
  for (auto& items : user_items) {
    expect(in, "user");
    items.resize(read<std::size_t>(in, "item count"));
    for (auto& i : items) i = read<ItemIndex>(in, "item");
  }
  return ItemKnnModel(std::move(neighbors), std::move(user_items), k);
}

}  // namespace shillbench
