#include "detective/metrics.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace detective {

using nlohmann::json;

namespace {

double round2(double pct) { return std::round(pct * 100.0) / 100.0; }

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1_from(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

json opt_pct(const std::optional<double>& v) {
    return v.has_value() ? json(round2(*v)) : json();
}

}  // namespace

MetricsReport compute_metrics(const std::vector<std::pair<HierLabel, Source>>& predictions,
                              F1Mode f1_mode) {
    if (predictions.empty()) throw ValidationError("no predictions to score");

    MetricsReport r;
    r.f1_mode = f1_mode == F1Mode::Macro ? "macro" : "machine-class";
    for (const auto& [truth, predicted] : predictions) {
        if (truth.is_human())
            ++(predicted == Source::Human ? r.human_as_human : r.human_as_machine);
        else
            ++(predicted == Source::Machine ? r.machine_as_machine : r.machine_as_human);
    }

    const auto humans = r.human_as_human + r.human_as_machine;
    const auto machines = r.machine_as_machine + r.machine_as_human;
    if (humans > 0) r.human_rec = 100.0 * static_cast<double>(r.human_as_human) / humans;
    if (machines > 0) r.machine_rec = 100.0 * static_cast<double>(r.machine_as_machine) / machines;
    double rec_sum = 0.0;
    int rec_n = 0;
    if (r.human_rec) rec_sum += *r.human_rec, ++rec_n;
    if (r.machine_rec) rec_sum += *r.machine_rec, ++rec_n;
    r.avg_rec = rec_sum / rec_n;

    const double prec_h = safe_div(r.human_as_human, r.human_as_human + r.machine_as_human);
    const double prec_m = safe_div(r.machine_as_machine, r.machine_as_machine + r.human_as_machine);
    const double f1_h = f1_from(prec_h, safe_div(r.human_as_human, humans));
    const double f1_m = f1_from(prec_m, safe_div(r.machine_as_machine, machines));
    if (f1_mode == F1Mode::MachineClass) {
        r.f1 = 100.0 * f1_m;
    } else {
        double f1_sum = 0.0;
        int f1_n = 0;
        if (humans > 0) f1_sum += f1_h, ++f1_n;
        if (machines > 0) f1_sum += f1_m, ++f1_n;
        r.f1 = 100.0 * f1_sum / f1_n;
    }
    return r;
}

MetricsReport compute_attribution_metrics(
    const std::vector<std::pair<std::string, std::string>>& predictions) {
    if (predictions.empty()) throw ValidationError("no predictions to score");

    MetricsReport r;
    std::set<std::string> truth_classes;
    std::map<std::string, std::size_t> predicted_counts;
    std::size_t correct = 0;
    for (const auto& [truth, predicted] : predictions) {
        ++r.confusion[truth][predicted];
        truth_classes.insert(truth);
        ++predicted_counts[predicted];
        if (truth == predicted) ++correct;
    }

    double prec_sum = 0.0, rec_sum = 0.0, f1_sum = 0.0;
    for (const auto& cls : truth_classes) {
        std::size_t tp = 0, truth_total = 0;
        for (const auto& [truth, row] : r.confusion) {
            for (const auto& [predicted, count] : row) {
                if (truth == cls && predicted == cls) tp += count;
                if (truth == cls) truth_total += count;
            }
        }
        const double precision = safe_div(tp, predicted_counts[cls]);
        const double recall = safe_div(tp, truth_total);
        prec_sum += precision;
        rec_sum += recall;
        f1_sum += f1_from(precision, recall);
    }
    const auto n_classes = static_cast<double>(truth_classes.size());
    r.accuracy = 100.0 * static_cast<double>(correct) / predictions.size();
    r.macro_precision = 100.0 * prec_sum / n_classes;
    r.macro_recall = 100.0 * rec_sum / n_classes;
    r.macro_f1 = 100.0 * f1_sum / n_classes;
    return r;
}

std::string MetricsReport::to_json() const {
    json j;
    if (accuracy.has_value()) {
        j["accuracy"] = opt_pct(accuracy);
        j["macro_precision"] = opt_pct(macro_precision);
        j["macro_recall"] = opt_pct(macro_recall);
        j["macro_f1"] = opt_pct(macro_f1);
        json conf = json::object();
        for (const auto& [truth, row] : confusion) conf[truth] = row;
        j["confusion"] = conf;
    } else {
        j["human_rec"] = opt_pct(human_rec);
        j["machine_rec"] = opt_pct(machine_rec);
        j["avg_rec"] = round2(avg_rec);
        j["f1"] = round2(f1);
        j["confusion"] = {{"human_as_human", human_as_human},
                          {"human_as_machine", human_as_machine},
                          {"machine_as_machine", machine_as_machine},
                          {"machine_as_human", machine_as_human}};
        j["f1_mode"] = f1_mode;
    }
    json cfg = json::object();
    if (k > 0) cfg["k"] = k;
    if (!vote_mode.empty()) cfg["vote_mode"] = vote_mode;
    if (!db_digest.empty()) cfg["db_digest"] = db_digest;
    j["config"] = cfg;
    return j.dump(2);
}

std::string MetricsReport::to_table() const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    if (accuracy.has_value()) {
        out << "Accuracy   " << *accuracy << "\n"
            << "Precision  " << *macro_precision << "\n"
            << "Recall     " << *macro_recall << "\n"
            << "F1         " << *macro_f1 << "\n";
    } else {
        out << "HumanRec    " << (human_rec ? *human_rec : 0.0) << (human_rec ? "" : " (n/a)")
            << "\n"
            << "MachineRec  " << (machine_rec ? *machine_rec : 0.0) << (machine_rec ? "" : " (n/a)")
            << "\n"
            << "AvgRec      " << avg_rec << "\n"
            << "F1          " << f1 << "\n";
    }
    return out.str();
}

}  // namespace detective
