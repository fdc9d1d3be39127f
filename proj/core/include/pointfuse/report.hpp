#pragma once

#include <filesystem>
#include <string>

#include "pointfuse/evaluation.hpp"

namespace pointfuse::eval {

// Line-record report files plus the rendered artifacts the CLI emits.
void save_report(const EvalReport& report, const std::filesystem::path& path,
                 const std::string& provenance_json = "");
EvalReport load_report(const std::filesystem::path& path);

// deterministic metric values only (no timing); used for reproducibility checks
void write_metrics_csv(const EvalReport& report, const std::filesystem::path& path);

void write_confusion_csv(const EvalReport& report, const std::filesystem::path& path);
void write_confusion_svg(const EvalReport& report, const std::filesystem::path& path);
void write_driver_scatter_svg(const EvalReport& report, const std::filesystem::path& path);

void write_ablation_csv(const AblationTable& table, const std::filesystem::path& path);

} // namespace pointfuse::eval
