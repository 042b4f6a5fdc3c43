#pragma once

// File formats: datasets and matrices as CSV with a header row and
// 17-significant-digit decimals (lossless round trip for doubles);
// checkpoints, reports, and certificates as JSON; run logs as JSON-lines.
// All output is UTF-8 with LF line endings and is byte-deterministic for a
// fixed input (timestamps never appear in these files).

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "recon/harness.hpp"
#include "recon/identify.hpp"
#include "recon/network.hpp"
#include "recon/objective.hpp"
#include "recon/runlog.hpp"

namespace recon::io {

std::string format_double(double value);  // %.17g

void save_dataset_csv(const std::string& path,
                      const network::LabeledDataset& data);
network::LabeledDataset load_dataset_csv(const std::string& path);

void save_model_json(const std::string& path,
                     const network::ModelParams& model);
network::ModelParams load_model_json(const std::string& path);

void save_candidates_json(const std::string& path,
                          const objective::CandidateSet& set);
objective::CandidateSet load_candidates_json(const std::string& path);

void save_identify_report_json(const std::string& path,
                               const identify::IdentifyReport& report);
void save_match_report_json(const std::string& path,
                            const harness::MatchReport& report);
void save_kkt_certificate_json(const std::string& path,
                               const network::KktCertificate& cert);

void save_runlog_jsonl(const std::string& path, const RunLog& log);
RunLog load_runlog_jsonl(const std::string& path);

// Small helpers shared by the CLI.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace recon::io
