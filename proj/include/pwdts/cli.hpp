#pragma once

#include "pwdts/backtest.hpp"
#include "pwdts/panel.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pwdts::cli {

inline constexpr const char* kVersion = "0.3.0";

// ---------------------------------------------------------------------------
// Panel CSV
// ---------------------------------------------------------------------------

/**
 * Column selection for a panel CSV: `date` (YYYYMM), factor columns
 * (MKT/Mkt-RF, SMB, HML, MOM/UMD, RMW, CMA, RF) and portfolio columns.
 * Values are used as stored unless `scale` is set.
 */
struct IngestOptions {
  std::vector<std::string> portfolios;  ///< empty = every non-factor column
  std::vector<std::string> factors;     ///< empty = every factor column except RF
  bool intercept = true;
  bool subtract_rf = false;
  double scale = 1.0;
  int date_from = 0;  ///< inclusive YYYYMM bounds, 0 = open
  int date_to = 0;
};

/// Canonical factor name (Mkt-RF -> MKT, UMD -> MOM), or empty when the column is not a factor.
std::string canonical_factor(const std::string& column);

PanelData parse_panel_csv(std::istream& in, const IngestOptions& options, const std::string& source = "<input>");
PanelData ingest_panel_csv(const std::string& path, const IngestOptions& options);

/// Writes date, the shared covariates (without "const") and one column per group, 17 significant digits.
void write_panel_csv(std::ostream& out, const PanelData& panel);

/// Resolves a data path: as given when it exists, else under $PWDTS_DATA_DIR.
std::string resolve_data_path(const std::string& path);

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct SimulateConfig {
  std::string setting = "stationary";  ///< stationary, setting1, setting2
  std::size_t reps = 100;
  std::size_t threads = 1;
  std::optional<Index> J;
  std::optional<Index> T;
  std::string dump_panel;  ///< write replication 0 as a panel CSV
};

struct RunConfig {
  std::string data;
  IngestOptions ingest;
  std::vector<MethodConfig> methods;
  std::string benchmark;
  std::string reference;
  Index start = -1;
  std::vector<std::string> bma_factors;
  std::size_t bma_refresh = 12;
  SimulateConfig simulate;
  GibbsConfig gibbs;
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  std::vector<std::string> formats = {"csv", "json"};

  /// Throws ValidationError on inconsistent settings.
  void validate() const;
};

/// Parses a JSON configuration; unknown keys are rejected at every level.
RunConfig parse_run_config(const std::string& json_text);
std::string to_json(const RunConfig& config);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Runs the command line; returns the process exit code (0 ok, 1 validation, 2 computation).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pwdts::cli
