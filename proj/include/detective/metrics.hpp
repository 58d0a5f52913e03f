#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "detective/corpus.hpp"

namespace detective {

enum class F1Mode : std::uint8_t { Macro = 0, MachineClass = 1 };

struct MetricsReport {
    // binary mode; percents, unrounded (rendering rounds to 2 decimals)
    std::optional<double> human_rec;
    std::optional<double> machine_rec;
    double avg_rec = 0.0;
    double f1 = 0.0;
    // confusion counts: true class x predicted class
    std::size_t human_as_human = 0, human_as_machine = 0;
    std::size_t machine_as_machine = 0, machine_as_human = 0;

    // attribution mode
    std::optional<double> accuracy;
    std::optional<double> macro_precision;
    std::optional<double> macro_recall;
    std::optional<double> macro_f1;
    std::map<std::string, std::map<std::string, std::size_t>> confusion;  // true -> predicted

    // config echo
    int k = 0;
    std::string vote_mode;
    std::string f1_mode;
    std::string db_digest;

    std::string to_json() const;
    std::string to_table() const;
};

// Binary detection metrics. avg_rec is the mean of the defined recalls;
// f1 is macro-F1 over the two classes or the machine-class F1.
MetricsReport compute_metrics(const std::vector<std::pair<HierLabel, Source>>& predictions,
                              F1Mode f1_mode = F1Mode::Macro);

// Multi-class attribution metrics, macro-averaged over classes present in
// the truth set; never-predicted classes contribute precision 0.
MetricsReport compute_attribution_metrics(
    const std::vector<std::pair<std::string, std::string>>& predictions);

}  // namespace detective
