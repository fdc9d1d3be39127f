#include "pointfuse/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "pointfuse/errors.hpp"

namespace pointfuse::eval {

using nlohmann::json;

namespace {

double json_safe(double v) { return std::isnan(v) ? -1.0 : v; }
double from_json_safe(double v) {
    return v < 0.0 ? std::numeric_limits<double>::quiet_NaN() : v;
}

std::string fmt(double v, int prec = 4) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

} // namespace

void save_report(const EvalReport& r, const std::filesystem::path& path,
                 const std::string& provenance_json) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    json header{{"schema_version", data::kSchemaVersion}, {"kind", "report"}};
    if (!provenance_json.empty()) header["provenance"] = json::parse(provenance_json);
    out << header.dump() << '\n';

    json summary{{"family", r.family},
                 {"head", r.head},
                 {"modalities", r.modalities},
                 {"class_ids", r.class_ids},
                 {"seed", r.seed},
                 {"accuracy", r.accuracy},
                 {"mad", json_safe(r.mad)},
                 {"pooled_accuracy", r.pooled_accuracy},
                 {"ms_per_sample", r.ms_per_sample},
                 {"samples_per_second", r.samples_per_second}};
    out << json{{"summary", summary}}.dump() << '\n';
    out << json{{"confusion", r.confusion}}.dump() << '\n';
    for (const FoldResult& f : r.folds)
        out << json{{"fold",
                     {{"test_driver", f.test_driver},
                      {"accuracy", f.accuracy},
                      {"mad", json_safe(f.mad)},
                      {"best_epoch", f.best_epoch},
                      {"train_seconds", f.train_seconds},
                      {"predict_seconds", f.predict_seconds},
                      {"confusion", f.confusion}}}}
                   .dump()
            << '\n';
    for (const DriverScore& d : r.per_driver)
        out << json{{"driver",
                     {{"id", d.driver_id},
                      {"accuracy", d.accuracy},
                      {"mad", json_safe(d.mad)},
                      {"flagged", d.flagged}}}}
                   .dump()
            << '\n';
}

EvalReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    EvalReport r;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) throw ParseError(path.string(), line, "invalid JSON record");
        if (!have_header) {
            if (!j.contains("schema_version"))
                throw ParseError(path.string(), line, "missing header");
            const int v = j["schema_version"].get<int>();
            if (v != data::kSchemaVersion) throw SchemaVersionError(v, data::kSchemaVersion);
            have_header = true;
        } else if (j.contains("summary")) {
            const json& s = j["summary"];
            r.family = s.at("family").get<std::string>();
            r.head = s.at("head").get<std::string>();
            r.modalities = s.at("modalities").get<std::string>();
            r.class_ids = s.at("class_ids").get<std::vector<int>>();
            r.seed = s.at("seed").get<std::uint64_t>();
            r.accuracy = s.at("accuracy").get<double>();
            r.mad = from_json_safe(s.at("mad").get<double>());
            r.pooled_accuracy = s.at("pooled_accuracy").get<double>();
            r.ms_per_sample = s.at("ms_per_sample").get<double>();
            r.samples_per_second = s.at("samples_per_second").get<double>();
        } else if (j.contains("confusion")) {
            r.confusion = j["confusion"].get<std::vector<std::vector<std::int64_t>>>();
        } else if (j.contains("fold")) {
            const json& f = j["fold"];
            FoldResult fr;
            fr.test_driver = f.at("test_driver").get<std::string>();
            fr.accuracy = f.at("accuracy").get<double>();
            fr.mad = from_json_safe(f.at("mad").get<double>());
            fr.best_epoch = f.at("best_epoch").get<int>();
            fr.train_seconds = f.at("train_seconds").get<double>();
            if (f.contains("predict_seconds"))
                fr.predict_seconds = f["predict_seconds"].get<double>();
            fr.confusion = f.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
            r.folds.push_back(std::move(fr));
        } else if (j.contains("driver")) {
            const json& d = j["driver"];
            r.per_driver.push_back({d.at("id").get<std::string>(),
                                    d.at("accuracy").get<double>(),
                                    from_json_safe(d.at("mad").get<double>()),
                                    d.at("flagged").get<bool>()});
        }
    }
    if (!have_header) throw ParseError(path.string(), 1, "missing header line");
    return r;
}

void write_metrics_csv(const EvalReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "metric,value\n";
    out << "family," << r.family << '\n';
    out << "head," << r.head << '\n';
    out << "modalities," << r.modalities << '\n';
    out << "classes," << r.class_ids.size() << '\n';
    out << "accuracy_percent," << fmt(r.accuracy) << '\n';
    out << "mad_degrees," << fmt(r.mad) << '\n';
    out << "pooled_accuracy_percent," << fmt(r.pooled_accuracy) << '\n';
    for (const FoldResult& f : r.folds)
        out << "fold_accuracy_" << f.test_driver << ',' << fmt(f.accuracy) << '\n';
    for (const FoldResult& f : r.folds)
        out << "fold_mad_" << f.test_driver << ',' << fmt(f.mad) << '\n';
}

void write_confusion_csv(const EvalReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "true\\pred";
    for (const int id : r.class_ids) out << ",aoi" << id;
    out << '\n';
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
        out << "aoi" << r.class_ids[i];
        for (const std::int64_t v : r.confusion[i]) out << ',' << v;
        out << '\n';
    }
}

void write_confusion_svg(const EvalReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    const int k = static_cast<int>(r.class_ids.size());
    const int cell = 34, margin = 60, title_h = 30;
    const int wpx = margin + k * cell + 20;
    const int hpx = title_h + margin + k * cell + 20;

    std::int64_t maxv = 1;
    for (const auto& row : r.confusion)
        for (const std::int64_t v : row) maxv = std::max(maxv, v);

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << wpx << "\" height=\"" << hpx
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<text x=\"" << margin << "\" y=\"18\" font-size=\"14\">Confusion matrix ("
        << r.modalities << ", " << r.family << ", " << k << " classes)</text>\n";
    for (int i = 0; i < k; ++i) {
        // row = true class, column = predicted class
        out << "<text x=\"8\" y=\"" << title_h + margin + i * cell + cell / 2 + 4
            << "\">aoi" << r.class_ids[static_cast<std::size_t>(i)] << "</text>\n";
        out << "<text x=\"" << margin + i * cell + 4 << "\" y=\"" << title_h + margin - 8
            << "\" transform=\"rotate(-45 " << margin + i * cell + 4 << ' '
            << title_h + margin - 8 << ")\">aoi" << r.class_ids[static_cast<std::size_t>(i)]
            << "</text>\n";
        for (int j = 0; j < k; ++j) {
            const std::int64_t v =
                r.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const double frac = static_cast<double>(v) / static_cast<double>(maxv);
            const int shade = 255 - static_cast<int>(std::lround(200.0 * frac));
            out << "<rect x=\"" << margin + j * cell << "\" y=\"" << title_h + margin + i * cell
                << "\" width=\"" << cell - 2 << "\" height=\"" << cell - 2 << "\" fill=\"rgb("
                << shade << ',' << shade << ",255)\" stroke=\"#ccc\"/>\n";
            if (v > 0)
                out << "<text x=\"" << margin + j * cell + cell / 2 - 6 << "\" y=\""
                    << title_h + margin + i * cell + cell / 2 + 4 << "\">" << v << "</text>\n";
        }
    }
    out << "</svg>\n";
}

void write_driver_scatter_svg(const EvalReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    const int w = 460, h = 360, ml = 60, mb = 50, mt = 30, mr = 20;
    double max_mad = 10.0;
    for (const DriverScore& d : r.per_driver)
        if (!std::isnan(d.mad)) max_mad = std::max(max_mad, d.mad * 1.15);

    auto px = [&](double mad) { return ml + (w - ml - mr) * (mad / max_mad); };
    auto py = [&](double acc) { return h - mb - (h - mb - mt) * (acc / 100.0); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<text x=\"" << ml << "\" y=\"18\" font-size=\"14\">Per-driver accuracy vs MAD ("
        << r.modalities << ", " << r.family << ")</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << (w - ml) / 2 << "\" y=\"" << h - 12 << "\">MAD (degrees)</text>\n";
    out << "<text x=\"12\" y=\"" << h / 2 << "\" transform=\"rotate(-90 12 " << h / 2
        << ")\">Accuracy (%)</text>\n";

    // outlier thresholds: 50% accuracy, 8 degrees MAD
    out << "<line x1=\"" << ml << "\" y1=\"" << py(50.0) << "\" x2=\"" << w - mr << "\" y2=\""
        << py(50.0) << "\" stroke=\"#c44\" stroke-dasharray=\"4,3\"/>\n";
    if (8.0 <= max_mad)
        out << "<line x1=\"" << px(8.0) << "\" y1=\"" << mt << "\" x2=\"" << px(8.0)
            << "\" y2=\"" << h - mb << "\" stroke=\"#c44\" stroke-dasharray=\"4,3\"/>\n";

    for (int tick = 0; tick <= 100; tick += 25)
        out << "<text x=\"" << ml - 34 << "\" y=\"" << py(tick) + 4 << "\">" << tick
            << "</text>\n";
    for (int tick = 0; tick <= static_cast<int>(max_mad); tick += 2)
        out << "<text x=\"" << px(tick) - 4 << "\" y=\"" << h - mb + 16 << "\">" << tick
            << "</text>\n";

    for (const DriverScore& d : r.per_driver) {
        const double x = std::isnan(d.mad) ? ml : px(d.mad);
        out << "<circle cx=\"" << x << "\" cy=\"" << py(d.accuracy) << "\" r=\"4\" fill=\""
            << (d.flagged ? "#c44" : "#36c") << "\"/>\n";
        out << "<text x=\"" << x + 6 << "\" y=\"" << py(d.accuracy) - 4 << "\">" << d.driver_id
            << "</text>\n";
    }
    out << "</svg>\n";
}

void write_ablation_csv(const AblationTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    // one table block per class subset, modality rows within
    std::vector<std::string> sets;
    for (const AblationCell& c : table.cells)
        if (std::find(sets.begin(), sets.end(), c.class_set) == sets.end())
            sets.push_back(c.class_set);
    bool first = true;
    for (const std::string& set : sets) {
        if (!first) out << '\n';
        first = false;
        out << "# " << set << " classes\n";
        out << "modalities,accuracy_percent,mad_degrees\n";
        for (const AblationCell& c : table.cells)
            if (c.class_set == set)
                out << c.modalities << ',' << fmt(c.accuracy, 1) << ',' << fmt(c.mad, 1)
                    << '\n';
    }
}

} // namespace pointfuse::eval
