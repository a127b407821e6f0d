#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "sgs/correlations.hpp"
#include "sgs/lattice.hpp"
#include "sgs/optimizer.hpp"
#include "sgs/sgs_state.hpp"

namespace sgs::io {

inline constexpr const char* kLibraryVersion = "sgs2d 0.1.0";
inline constexpr int kStateFormatVersion = 1;

/// Write content to path atomically (temp file + rename).
void atomic_write(const std::string& path, const std::string& content);

/// FNV-1a hash of the canonical JSON dump, hex encoded.
std::string config_hash(const nlohmann::json& config);

/// State container: "SGS1" magic, little-endian u64 header length, JSON
/// header (params, conventions, tensor directory), then the tensor payload
/// as little-endian complex128 values in row-major order.
void save_state(const SGSState& s, const std::string& path);
SGSState load_state(const std::string& path);

/// Preparation sequence as a JSON gate list.
void save_prep_sequence(const PrepSequence& seq, const std::string& path);

/// PEPS tensors in the same binary container as states.
void save_peps(const PepsGrid& grid, const LatticeSpec& spec, const std::string& path);

/// Line-delimited JSON records of an optimization trace.
void save_trace(const EnergyTrace& trace, const std::string& path);

nlohmann::json decay_report_json(const DecayReport& report);
std::string decay_report_csv(const DecayReport& report);
nlohmann::json g_analysis_json(const GMatrixAnalysis& analysis);

/// One result row of a batch job.
struct ResultRecord {
    std::string model;
    LatticeSpec lattice;
    std::string family; // "sgs" | "bsgs"
    int D = 0, M = 1, N = 1;
    double e0 = 0.0;
    std::optional<double> reference; // exact energy when available
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;
    std::string trace_path;
    bool comparable = true; // false for rows without a reproducible reference

    nlohmann::json to_json() const;
    static std::string csv_header();
    std::string to_csv() const;
};

} // namespace sgs::io
