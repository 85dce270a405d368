#pragma once

// Run configuration, initial data, trajectory directories and failure records.

#include "qns/entropy_ledger.hpp"
#include "qns/limit_lab.hpp"
#include "qns/renormalization.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace qns {

struct GridSpec {
  int dim = 2;
  int n = 32;
  Backend backend = Backend::spectral;
};

struct InitialSpec {
  std::string name = "acoustic_pulse";
  double amplitude = 0.2;
  int wavenumber = 1;
  double width = 0.1;
  double velocity = 0.0;
  /// near_vacuum_bump: min rho = floor_margin * rho_floor, at least 2.
  double floor_margin = 4.0;
  std::uint64_t seed = 1;
};

enum class SourceKind { zero, shear_M, pulsed_f, shear_M_pulsed_f };
std::string to_string(SourceKind k);
SourceKind source_kind_from_string(const std::string& s);

struct SourceSpec {
  SourceKind kind = SourceKind::zero;
  double amplitude = 0.0;
  int wavenumber = 1;
  double pulse_center = 0.05;
  double pulse_width = 0.02;
};

struct SweepSpec {
  SweepParam param = SweepParam::kappa;
  std::vector<double> values = {0.1, 0.05, 0.025, 0.0125, 0.0};
};

struct CommutatorSpec {
  int n = 1024;
  double p = 2.0, q = 2.0;
  std::vector<double> epsilons = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
};

struct RunConfig {
  GridSpec grid;
  ModelParams model;
  StepConfig step;
  InitialSpec initial;
  SourceSpec sources;
  std::string output_dir = "qns_out";
  SweepSpec sweep;
  CommutatorSpec commutator;

  /// Throws ConfigError.
  void validate() const;
};

/// INI text with sections grid, model, step, initial, sources, output, sweep, commutator.
/// Missing keys keep their defaults; unknown sections or keys throw ConfigError.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& path);
/// Every key, doubles at 17 significant digits.
void emit_config(std::ostream& os, const RunConfig& cfg);
std::string config_text(const RunConfig& cfg);

/// Initial names: uniform, acoustic_pulse, shear, near_vacuum_bump, random_bandlimited.
/// Throws ConfigError for unknown names and InvariantViolation if E_r is not finite.
FlowState make_initial(const TorusGrid& g, const InitialSpec& spec, const ModelParams& p);
const std::vector<std::string>& initial_names();

SourceTerms make_sources(const SourceSpec& spec, int dim);

/// QNS_OUTPUT_DIR when set and non-empty, otherwise cfg.output_dir.
std::filesystem::path resolve_output_dir(const RunConfig& cfg);

/// Advisory lock: creates <dir>/.qns.lock exclusively, removes it on destruction.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// manifest.json, state_NNNNN.qnsf (mu then m) and ledger.csv.
void write_trajectory(const std::filesystem::path& dir, const RunConfig& cfg, const Trajectory& tr,
                      const std::vector<LedgerRow>& rows);

struct LoadedRun {
  RunConfig config;
  Trajectory trajectory;
};
LoadedRun read_trajectory(const std::filesystem::path& dir);

struct Simulation {
  Trajectory trajectory;
  std::vector<LedgerRow> ledger;
};
Simulation simulate(const RunConfig& cfg);

struct IdentityCheck {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};
/// Quantum-form equivalence, viscous defining identity, pressure form, phi_m breakpoints,
/// on the configured backend at max(n, 64) points per axis.
std::vector<IdentityCheck> verify_identities(const RunConfig& cfg);

/// atan family over five scales, two Gaussian-damped members and phi_1.
std::vector<RenormFn> standard_renorm_scan(int dim);

struct DefectScanRow {
  std::string name;
  double phi_second_sup = 0.0;
  double R_mass = 0.0;
  double Rbar_mass = 0.0;
  /// (R_mass + Rbar_mass) / (phi_second_sup M_r)
  double ratio = 0.0;
};

struct DefectScan {
  double M_r = 0.0;
  /// Largest ratio over the scan, the smallest single constant covering every member.
  double C_bar = 0.0;
  /// max / min of phi_second_sup over the scan.
  double curvature_span = 0.0;
  std::vector<DefectScanRow> rows;
};
DefectScan defect_scan(const DiffOps& ops, const Trajectory& tr, const std::vector<RenormFn>& scan);

struct RecoveryRow {
  int n = 0;
  double difference = 0.0;
};
/// |renormalized residual with phi_n - momentum weak residual| along axis 0 for psi.
std::vector<RecoveryRow> recovery_table(const DiffOps& ops, const Trajectory& tr, const TestFn& psi,
                                        const std::vector<int>& ns);

struct CommutatorCase {
  std::string name;
  Field g, h;
};
/// Smooth g against rough h (smoothed square wave, sawtooth, square-root cusp, narrow spikes) on a 1D grid.
std::vector<CommutatorCase> commutator_corpus(const TorusGrid& g);

enum class ExitCode : int { ok = 0, invariant = 2, numerical = 3, config = 4 };

struct FailureRecord {
  ExitCode code = ExitCode::ok;
  std::string kind;
  std::string invariant;
  std::string detail;
};
/// Maps the active exception to a record; call inside a catch block.
FailureRecord failure_from_current_exception();
std::string failure_json(const FailureRecord& f);

}  // namespace qns
