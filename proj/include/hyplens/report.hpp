#pragma once

#include "hyplens/energy.hpp"
#include "hyplens/sweep.hpp"
#include "hyplens/system.hpp"

#include <string>
#include <vector>

namespace hyplens {

/// One row per ε; fixed number format so identical runs give identical bytes.
std::string sweep_csv(const SweepReport& rep);
/// Fits, classifications, verdicts.
std::string sweep_summary_json(const SweepReport& rep);
/// One JSON object per line.
std::string certificates_jsonl(const std::vector<EnergyCertificate>& certs);
std::string certificate_json(const EnergyCertificate& c);
/// Two-column (log(1/ε), log value) plot data for one column.
std::string plot_data(const SweepReport& rep, const std::string& column);
std::string validation_json(const ValidationReport& rep, const std::string& scenario);

/// Row without snapshots, round-tripping every double exactly.
std::string row_json(const SweepRow& row);
SweepRow row_from_json(const std::string& text);

/// Flat little-endian IEEE-754 doubles (re, im interleaved), frames back to back.
void write_fields(const std::string& path, const std::vector<GridField>& frames);
std::vector<GridField> read_fields(const std::string& path, size_t frames, size_t values);
/// Sidecar describing a field file.
std::string field_sidecar(const Grid& g, int comps, const std::vector<double>& times);

/// SHA-256 of a file as lowercase hex.
std::string sha256_file(const std::string& path);
std::string sha256_hex(const std::string& bytes);

std::string format_double(double v);

}  // namespace hyplens
