#include "shillbench/defense.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace shillbench {

double ConfusionCounts::recall() const {
  const auto pos = true_positive + false_negative;
  return pos == 0 ? 0.0 : static_cast<double>(true_positive) / static_cast<double>(pos);
}

double ConfusionCounts::precision() const {
  const auto flagged = true_positive + false_positive;
  return flagged == 0 ? 0.0 : static_cast<double>(true_positive) / static_cast<double>(flagged);
}

namespace {

// Explicit rows are standardised over the observed ratings only. Implicit
// rows are constant on the observed entries, so the whole 0/1 row is used.
Matrix zscore_rows(const InteractionDataset& d) {
  Matrix z = Matrix::Zero(static_cast<Eigen::Index>(d.n_users()), static_cast<Eigen::Index>(d.n_items()));
  const double n_items = static_cast<double>(d.n_items());
  for (std::size_t u = 0; u < d.n_users(); ++u) {
    const auto row = d.user_interactions(static_cast<UserIndex>(u));
    if (row.empty()) continue;
    const auto r = static_cast<Eigen::Index>(u);
    if (d.is_explicit()) {
      double mean = 0.0;
      for (const auto& x : row) mean += x.rating;
      mean /= static_cast<double>(row.size());
      double var = 0.0;
      for (const auto& x : row) var += (x.rating - mean) * (x.rating - mean);
      const double sd = std::sqrt(var / static_cast<double>(row.size()));
      if (sd == 0.0) continue;
      for (const auto& x : row) z(r, x.item) = (x.rating - mean) / sd;
    } else {
      const double p = static_cast<double>(row.size()) / n_items;
      const double sd = std::sqrt(p * (1.0 - p));
      if (sd == 0.0) continue;
      z.row(r).setConstant(-p / sd);
      for (const auto& x : row) z(r, x.item) = (1.0 - p) / sd;
    }
  }
  return z;
}

ConfusionCounts confusion_for(const InteractionDataset& d, const std::vector<UserIndex>& flagged) {
  ConfusionCounts c;
  std::vector<char> mark(d.n_users(), 0);
  for (const auto u : flagged) mark[static_cast<std::size_t>(u)] = 1;
  for (std::size_t u = 0; u < d.n_users(); ++u) {
    const bool fake = d.is_fake(static_cast<UserIndex>(u));
    if (mark[u])
      ++(fake ? c.true_positive : c.false_positive);
    else
      ++(fake ? c.false_negative : c.true_negative);
  }
  return c;
}

}  // namespace

Matrix user_principal_loadings(const InteractionDataset& d, int n_components) {
  if (n_components < 1) throw DataError("n_components must be at least 1");
  const Matrix z = zscore_rows(d);
  const auto nu = z.rows();
  const auto k = std::min<Eigen::Index>(n_components, std::min(nu, z.cols()));
  Matrix out(nu, k);
  if (nu <= z.cols()) {
    const Eigen::MatrixXd gram = z * z.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    for (Eigen::Index c = 0; c < k; ++c) out.col(c) = eig.eigenvectors().col(nu - 1 - c);
  } else {
    const Eigen::MatrixXd gram = z.transpose() * z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const auto ni = gram.rows();
    for (Eigen::Index c = 0; c < k; ++c) {
      Eigen::VectorXd v = z * eig.eigenvectors().col(ni - 1 - c);
      const double n = v.norm();
      out.col(c) = n > 0.0 ? Eigen::VectorXd(v / n) : v;
    }
  }
  return out;
}

SuspectReport pca_varselect(const InteractionDataset& d, int n_components, int flag_count, SuspicionRule rule) {
  if (flag_count < 0) throw DataError("flag_count must be non-negative");
  SuspectReport r;
  r.n_components = n_components;
  r.flag_count = flag_count;
  r.rule = rule;
  const Matrix loadings = user_principal_loadings(d, n_components);
  r.scores.resize(d.n_users());
  for (std::size_t u = 0; u < d.n_users(); ++u) r.scores[u] = loadings.row(static_cast<Eigen::Index>(u)).squaredNorm();

  auto count = static_cast<std::size_t>(flag_count);
  if (count > d.n_users()) {
    spdlog::warn("flag_count {} exceeds the {} users; flagging all", flag_count, d.n_users());
    count = d.n_users();
  }
  std::vector<UserIndex> order(d.n_users());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](UserIndex a, UserIndex b) {
    const double sa = r.scores[static_cast<std::size_t>(a)], sb = r.scores[static_cast<std::size_t>(b)];
    return rule == SuspicionRule::kHighestLoading ? sa > sb : sa < sb;
  });
  r.flagged.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(r.flagged.begin(), r.flagged.end());
  if (d.origin_labels()) r.confusion = confusion_for(d, r.flagged);
  return r;
}

SuspectReport oracle_suspects(const InteractionDataset& d) {
  SuspectReport r;
  r.scores.assign(d.n_users(), 0.0);
  for (std::size_t u = 0; u < d.n_users(); ++u) {
    if (!d.is_fake(static_cast<UserIndex>(u))) continue;
    r.flagged.push_back(static_cast<UserIndex>(u));
    r.scores[u] = 1.0;
  }
  r.flag_count = static_cast<int>(r.flagged.size());
  if (d.origin_labels()) r.confusion = confusion_for(d, r.flagged);
  return r;
}

FilteredDataset filter_users(const InteractionDataset& d, const std::vector<UserIndex>& flagged) {
  std::vector<char> drop(d.n_users(), 0);
  for (const auto u : flagged) {
    if (u < 0 || static_cast<std::size_t>(u) >= d.n_users()) throw DataError("flagged user out of range");
    drop[static_cast<std::size_t>(u)] = 1;
  }
  const auto src = d.to_parts();
  InteractionDataset::Parts parts;
  parts.item_ids = src.item_ids;
  parts.kind = src.kind;
  parts.bounds = src.bounds;
  if (src.origin) parts.origin.emplace();
  FilteredDataset out;
  std::vector<UserIndex> remap(d.n_users(), -1);
  for (std::size_t u = 0; u < d.n_users(); ++u) {
    if (drop[u]) continue;
    remap[u] = static_cast<UserIndex>(parts.user_ids.size());
    parts.user_ids.push_back(src.user_ids[u]);
    if (src.origin) parts.origin->push_back((*src.origin)[u]);
    out.kept_users.push_back(static_cast<UserIndex>(u));
  }
  for (const auto& x : src.interactions) {
    const auto nu = remap[static_cast<std::size_t>(x.user)];
    if (nu < 0) continue;
    parts.interactions.push_back({nu, x.item, x.rating, x.timestamp});
  }
  out.data = InteractionDataset::from_parts(std::move(parts));
  return out;
}

std::string suspect_report_text(const SuspectReport& r, const InteractionDataset& d) {
  std::ostringstream out;
  out << "user\tscore\tflagged\torigin\n";
  char buf[32];
  for (std::size_t u = 0; u < d.n_users(); ++u) {
    const auto id = static_cast<UserIndex>(u);
    std::snprintf(buf, sizeof buf, "%.17g", r.scores.at(u));
    const bool flagged = std::binary_search(r.flagged.begin(), r.flagged.end(), id);
    out << d.user_id(id) << '\t' << buf << '\t' << (flagged ? 1 : 0) << '\t';
    if (d.origin_labels()) out << (d.is_fake(id) ? "fake" : "genuine");
    out << '\n';
  }
  out << "# n_components " << r.n_components << " flag_count " << r.flag_count << '\n';
  if (r.confusion) {
    const auto& c = *r.confusion;
    out << "# tp " << c.true_positive << " fp " << c.false_positive << " fn " << c.false_negative << " tn "
        << c.true_negative << '\n';
  }
  return out.str();
}

}  // namespace shillbench
