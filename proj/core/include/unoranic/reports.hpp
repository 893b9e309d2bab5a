#pragma once

#include <string>
#include <vector>

#include "unoranic/config.hpp"
#include "unoranic/experiments.hpp"

namespace unoranic::eval {

using Json = config::Json;

// Non-finite numbers serialize as the strings "inf", "-inf" and "nan".
Json json_number(double value);

Json to_json(const PsnrReport& report);
Json to_json(const RevisionReport& report);
Json to_json(const std::vector<ProbeResult>& results);
Json to_json(const RobustnessReport& report);

std::string to_csv(const std::vector<PsnrReport>& reports);
std::string to_csv(const RevisionReport& report);
std::string to_csv(const std::vector<ProbeResult>& results);
std::string to_csv(const RobustnessReport& report);

struct Series {
  std::string name;
  std::vector<double> values;  // one per category; non-finite points are skipped
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> categories;
  std::vector<Series> series;
};

std::string render_line_chart(const Chart& chart);
std::string render_bar_chart(const Chart& chart);

// PSNR per corruption for corrupted input, revision and the clean reference.
Chart revision_chart(const RevisionReport& report);
// Mean AUC over `kinds` against severity 0..5, one line per model.
Chart robustness_chart(const RobustnessReport& report, const std::vector<augment::CorruptionKind>& kinds,
                       const std::string& title);
Chart reconstruction_chart(const std::vector<PsnrReport>& reports);

}  // namespace unoranic::eval
