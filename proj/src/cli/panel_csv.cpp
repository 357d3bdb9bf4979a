#include "pwdts/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace pwdts::cli {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  return r.ec == std::errc() && r.ptr == e;
}

bool is_sentinel(double v) { return v == -99.99 || v == -999.0; }

int parse_date(const std::string& s, std::size_t line) {
  const bool digits = s.size() == 6 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  const int v = digits ? std::atoi(s.c_str()) : 0;
  if (!digits || v % 100 < 1 || v % 100 > 12) {
    throw ValidationError("line " + std::to_string(line) + ": malformed date '" + s + "' (expected YYYYMM)");
  }
  return v;
}

}  // namespace

std::string canonical_factor(const std::string& column) {
  const std::string u = upper(column);
  if (u == "MKT" || u == "MKT-RF" || u == "MKTRF" || u == "MKT_RF") return "MKT";
  if (u == "MOM" || u == "UMD") return "MOM";
  if (u == "SMB" || u == "HML" || u == "RMW" || u == "CMA" || u == "RF") return u;
  return {};
}

PanelData parse_panel_csv(std::istream& in, const IngestOptions& options, const std::string& source) {
  require(options.scale > 0.0 && std::isfinite(options.scale), "ingest: scale must be positive");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = split_csv(t);
    break;
  }
  require(!header.empty(), source + ": no header row");
  require(header[0].empty() || upper(header[0]) == "DATE", source + ": first column must be 'date'");

  // Canonical names; requested factors count as factors even when the name is unknown.
  std::vector<std::string> requested;
  for (const auto& f : options.factors) {
    const std::string c = canonical_factor(f);
    requested.push_back(c.empty() ? f : c);
  }
  const std::size_t K = header.size();
  std::vector<std::string> names(K);
  std::vector<char> is_factor(K, 0);
  for (std::size_t c = 1; c < K; ++c) {
    require(!header[c].empty(), source + ": empty column name at position " + std::to_string(c + 1));
    const std::string canon = canonical_factor(header[c]);
    names[c] = canon.empty() ? header[c] : canon;
    is_factor[c] = !canon.empty() || std::find(requested.begin(), requested.end(), names[c]) != requested.end();
    for (std::size_t d = 1; d < c; ++d) require(names[d] != names[c], source + ": duplicate column '" + names[c] + "'");
  }
  auto column_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t c = 1; c < K; ++c) {
      if (names[c] == name) return c;
    }
    throw ValidationError(source + ": column '" + name + "' not found");
  };

  std::vector<std::size_t> factor_cols;
  if (requested.empty()) {
    for (std::size_t c = 1; c < K; ++c) {
      if (is_factor[c] && names[c] != "RF") factor_cols.push_back(c);
    }
  } else {
    for (const auto& f : requested) {
      require(f != "RF", source + ": RF cannot be a regression factor");
      factor_cols.push_back(column_of(f));
    }
  }
  std::vector<std::size_t> port_cols;
  if (options.portfolios.empty()) {
    for (std::size_t c = 1; c < K; ++c) {
      if (!is_factor[c]) port_cols.push_back(c);
    }
  } else {
    for (const auto& p : options.portfolios) {
      const std::size_t c = column_of(p);
      require(!is_factor[c], source + ": '" + p + "' is a factor column, not a portfolio");
      port_cols.push_back(c);
    }
  }
  require(!port_cols.empty(), source + ": no portfolio columns");
  std::size_t rf_col = 0;
  if (options.subtract_rf) rf_col = column_of("RF");

  std::vector<std::size_t> selected = factor_cols;
  selected.insert(selected.end(), port_cols.begin(), port_cols.end());
  if (options.subtract_rf) selected.push_back(rf_col);

  std::vector<int> dates;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> bad;
  std::size_t bad_total = 0;
  int last_date = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split_csv(t);
    require(cells.size() == K, source + " line " + std::to_string(line_no) + ": expected " + std::to_string(K) +
                                   " fields, found " + std::to_string(cells.size()));
    const int date = parse_date(cells[0], line_no);
    require(date > last_date, source + " line " + std::to_string(line_no) + ": date " + cells[0] +
                                  " is not after the previous date " + std::to_string(last_date));
    last_date = date;
    if ((options.date_from && date < options.date_from) || (options.date_to && date > options.date_to)) continue;
    std::vector<double> values(K, 0.0);
    for (std::size_t c : selected) {
      double v = 0.0;
      if (!parse_double(cells[c], v) || is_sentinel(v) || !std::isfinite(v)) {
        if (bad.size() < 20) bad.push_back(std::to_string(date) + "/" + names[c] + "='" + cells[c] + "'");
        ++bad_total;
        continue;
      }
      values[c] = v;
    }
    dates.push_back(date);
    rows.push_back(std::move(values));
  }
  if (bad_total > 0) {
    std::string msg = source + ": missing or invalid values in selected columns:";
    for (const auto& b : bad) msg += " " + b;
    if (bad_total > bad.size()) msg += " and " + std::to_string(bad_total - bad.size()) + " more";
    throw ValidationError(msg);
  }
  require(!rows.empty(), source + ": no rows in the requested date range");

  const auto T = static_cast<Index>(rows.size());
  const Index p = static_cast<Index>(factor_cols.size()) + (options.intercept ? 1 : 0);
  require(p >= 1, source + ": no covariates (no factors and no intercept)");
  PanelData panel;
  panel.dates = std::move(dates);
  if (options.intercept) panel.covariate_names.push_back("const");
  for (std::size_t c : factor_cols) panel.covariate_names.push_back(names[c]);
  Matrix X(T, p);
  for (Index t = 0; t < T; ++t) {
    const auto& r = rows[static_cast<std::size_t>(t)];
    Index k = 0;
    if (options.intercept) X(t, k++) = 1.0;
    for (std::size_t c : factor_cols) X(t, k++) = options.scale * r[c];
  }
  for (std::size_t c : port_cols) {
    Group g;
    g.name = names[c];
    g.X = X;
    g.y.resize(T);
    for (Index t = 0; t < T; ++t) {
      const auto& r = rows[static_cast<std::size_t>(t)];
      g.y[t] = options.scale * (r[c] - (options.subtract_rf ? r[rf_col] : 0.0));
    }
    panel.groups.push_back(std::move(g));
  }
  panel.validate();
  return panel;
}

PanelData ingest_panel_csv(const std::string& path, const IngestOptions& options) {
  const std::string resolved = resolve_data_path(path);
  std::ifstream in(resolved);
  require(in.good(), "cannot open data file '" + path + "'");
  return parse_panel_csv(in, options, resolved);
}

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  require(!path.empty(), "no data file given");
  if (fs::exists(path)) return path;
  if (const char* dir = std::getenv("PWDTS_DATA_DIR"); dir && fs::path(path).is_relative()) {
    const fs::path alt = fs::path(dir) / path;
    if (fs::exists(alt)) return alt.string();
  }
  throw ValidationError("data file '" + path + "' not found");
}

void write_panel_csv(std::ostream& out, const PanelData& panel) {
  panel.validate();
  require(panel.J() >= 1, "panel dump: empty panel");
  const Matrix& X = panel.groups[0].X;
  for (const auto& g : panel.groups) require(g.X == X, "panel dump: groups must share their covariates");
  std::vector<Index> cols;
  for (Index k = 0; k < panel.p(); ++k) {
    if (panel.covariate_names[static_cast<std::size_t>(k)] != "const") cols.push_back(k);
  }
  out << "date";
  for (Index k : cols) out << ',' << panel.covariate_names[static_cast<std::size_t>(k)];
  for (const auto& g : panel.groups) out << ',' << g.name;
  out << '\n';
  char buf[40];
  for (Index t = 0; t < panel.T(); ++t) {
    out << panel.dates[static_cast<std::size_t>(t)];
    for (Index k : cols) {
      std::snprintf(buf, sizeof buf, "%.17g", X(t, k));
      out << ',' << buf;
    }
    for (const auto& g : panel.groups) {
      std::snprintf(buf, sizeof buf, "%.17g", g.y[t]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace pwdts::cli
