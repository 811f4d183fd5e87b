#include "shillbench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <set>
#include <sstream>

#include "shillbench/common.hpp"

namespace shillbench {
namespace {

using Json = nlohmann::json;

const std::vector<std::string> kLeadColumns = {"NDCG@10", "NDCG@50", "HR@10", "HR@50"};
const std::vector<std::string> kConditionOrder = {"clean", "attacked", "defended"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace

std::string to_json(const EvalReport& r) {
  Json j;
  j["metadata"] = Json::object();
  for (const auto& [k, v] : r.metadata) j["metadata"][k] = v;
  j["conditions"] = Json::object();
  for (const auto& [cond, metrics] : r.conditions) {
    auto& c = j["conditions"][cond];
    c = Json::object();
    for (const auto& [name, value] : metrics) c[name] = value;
  }
  j["summary"] = Json::object();
  for (const auto& [k, v] : r.summary) j["summary"][k] = v ? Json(*v) : Json(nullptr);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const auto j = Json::parse(text);
    for (const auto& [k, v] : j.at("metadata").items()) r.metadata[k] = v.get<std::string>();
    for (const auto& [cond, metrics] : j.at("conditions").items())
      for (const auto& [name, value] : metrics.items()) r.conditions[cond][name] = value.get<double>();
    for (const auto& [k, v] : j.at("summary").items())
      r.summary[k] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string render_table(const EvalReport& r) {
  std::vector<std::string> columns;
  std::set<std::string> seen;
  for (const auto& c : kLeadColumns) {
    columns.push_back(c);
    seen.insert(c);
  }
  for (const auto& [cond, metrics] : r.conditions)
    for (const auto& [name, value] : metrics)
      if (seen.insert(name).second) columns.push_back(name);
  std::sort(columns.begin() + static_cast<std::ptrdiff_t>(kLeadColumns.size()), columns.end());

  std::vector<std::string> rows;
  for (const auto& c : kConditionOrder)
    if (r.conditions.count(c)) rows.push_back(c);
  for (const auto& [cond, metrics] : r.conditions)
    if (std::find(rows.begin(), rows.end(), cond) == rows.end()) rows.push_back(cond);

  std::size_t first = std::string("condition").size();
  for (const auto& row : rows) first = std::max(first, row.size());
  std::vector<std::size_t> widths;
  for (const auto& c : columns) widths.push_back(std::max<std::size_t>(c.size(), 8));

  std::ostringstream out;
  for (const auto& [k, v] : r.metadata) out << k << ": " << v << '\n';
  out << '\n' << pad("condition", first);
  for (std::size_t c = 0; c < columns.size(); ++c) out << "  " << pad(columns[c], widths[c]);
  out << '\n';
  for (const auto& row : rows) {
    out << pad(row, first);
    const auto& metrics = r.conditions.at(row);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto it = metrics.find(columns[c]);
      out << "  " << pad(it == metrics.end() ? "-" : fixed(it->second), widths[c]);
    }
    out << '\n';
  }
  if (!r.summary.empty()) {
    out << '\n';
    for (const auto& [k, v] : r.summary) out << k << ": " << (v ? fixed(*v) : std::string("n/a")) << '\n';
  }
  return out.str();
}

}  // namespace shillbench
