#include "lrbench/results_store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "lrbench/errors.hpp"
#include "lrbench/text.hpp"

namespace lrbench {

namespace {

using nlohmann::json;

constexpr std::array<int, 4> kLowResolutions{16, 32, 64, 128};
constexpr std::array<int, 7> kHrResolutions{224, 256, 336, 372, 378, 384, 512};

std::string record_key(const std::string& model, const std::string& dataset, int res) {
    return model + '\x1f' + dataset + '\x1f' + std::to_string(res);
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return doc;
}

double convert_accuracy(double value, bool percent, const std::string& where) {
    const double hi = percent ? 100.0 : 1.0;
    if (value < 0.0 || value > hi) {
        throw ValidationError(where + ": accuracy " + format_double(value) +
                              " outside [0, " + format_double(hi) + "]");
    }
    return percent ? value / 100.0 : value;
}

std::vector<AccuracyRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::vector<AccuracyRecord> records;
    std::string line;
    int line_no = 0;
    bool percent = false;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view stripped = trim(line);
        if (stripped.empty()) {
            continue;
        }
        if (stripped.front() == '#') {
            if (!header_seen && stripped.find("unit=percent") != std::string_view::npos) {
                percent = true;
            }
            continue;
        }
        auto fields = split_csv_line(stripped);
        if (!header_seen) {
            if (fields.size() < 5 || fields[0] != "model_id" || fields[1] != "backbone_id" ||
                fields[2] != "dataset_id" || fields[3] != "resolution" || fields[4] != "top1") {
                throw ValidationError(path + " row " + std::to_string(line_no) +
                                      ": bad header, expected "
                                      "model_id,backbone_id,dataset_id,resolution,top1[,top5]");
            }
            header_seen = true;
            continue;
        }
        const std::string where = path + " row " + std::to_string(line_no);
        if (fields.size() < 5 || fields.size() > 6) {
            throw ValidationError(where + ": expected 5 or 6 fields, got " +
                                  std::to_string(fields.size()));
        }
        AccuracyRecord rec;
        rec.model_id = fields[0];
        rec.backbone_id = fields[1];
        rec.dataset_id = fields[2];
        const auto res = parse_int(fields[3]);
        if (!res || *res <= 0) {
            throw ValidationError(where + ": bad resolution '" + fields[3] + "'");
        }
        rec.resolution = static_cast<int>(*res);
        const auto top1 = parse_double(fields[4]);
        if (!top1) {
            throw ValidationError(where + ": bad top1 '" + fields[4] + "'");
        }
        rec.top1 = convert_accuracy(*top1, percent, where);
        if (fields.size() == 6 && !fields[5].empty()) {
            const auto top5 = parse_double(fields[5]);
            if (!top5) {
                throw ValidationError(where + ": bad top5 '" + fields[5] + "'");
            }
            rec.top5 = convert_accuracy(*top5, percent, where);
        }
        records.push_back(std::move(rec));
    }
    if (!header_seen) {
        throw ValidationError(path + ": missing header line");
    }
    return records;
}

std::vector<AccuracyRecord> read_records_json(const std::string& path) {
    const json doc = load_json_file(path);
    bool percent = false;
    const json* rows = &doc;
    if (doc.is_object()) {
        percent = doc.value("unit", "") == std::string("percent");
        if (!doc.contains("records")) {
            throw ValidationError(path + ": object form requires a 'records' array");
        }
        rows = &doc.at("records");
    }
    if (!rows->is_array()) {
        throw ValidationError(path + ": expected an array of records");
    }
    std::vector<AccuracyRecord> records;
    int index = 0;
    for (const auto& row : *rows) {
        ++index;
        const std::string where = path + " record " + std::to_string(index);
        try {
            AccuracyRecord rec;
            rec.model_id = row.at("model_id").get<std::string>();
            rec.backbone_id = row.at("backbone_id").get<std::string>();
            rec.dataset_id = row.at("dataset_id").get<std::string>();
            rec.resolution = row.at("resolution").get<int>();
            rec.top1 = convert_accuracy(row.at("top1").get<double>(), percent, where);
            if (row.contains("top5")) {
                rec.top5 = convert_accuracy(row.at("top5").get<double>(), percent, where);
            }
            records.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return records;
}

}  // namespace

ResultsTable::ResultsTable(std::vector<AccuracyRecord> records,
                           std::vector<DatasetMeta> datasets, std::vector<ModelMeta> models)
    : records_(std::move(records)),
      datasets_(std::move(datasets)),
      models_(std::move(models)) {
    validate();
}

void ResultsTable::validate() {
    for (const auto& ds : datasets_) {
        if (ds.dataset_id.empty() || ds.num_classes <= 0) {
            throw ValidationError("dataset meta '" + ds.dataset_id + "': num_classes must be positive");
        }
        if (!dataset_index_.emplace(ds.dataset_id, dataset_index_.size()).second) {
            throw ValidationError("duplicate dataset meta '" + ds.dataset_id + "'");
        }
    }
    for (const auto& mm : models_) {
        if (std::find(kHrResolutions.begin(), kHrResolutions.end(), mm.hr_resolution) ==
            kHrResolutions.end()) {
            throw ValidationError("model meta '" + mm.model_id + "': hr_resolution " +
                                  std::to_string(mm.hr_resolution) + " not a known HR resolution");
        }
        if (!model_index_.emplace(mm.model_id, model_index_.size()).second) {
            throw ValidationError("duplicate model meta '" + mm.model_id + "'");
        }
    }
    std::size_t row = 0;
    for (const auto& rec : records_) {
        ++row;
        const std::string where = "record " + std::to_string(row) + " (" + rec.model_id + ", " +
                                  rec.dataset_id + ", " + std::to_string(rec.resolution) + ")";
        const auto model_it = model_index_.find(rec.model_id);
        if (model_it == model_index_.end()) {
            throw ValidationError(where + ": unresolvable model id");
        }
        if (dataset_index_.find(rec.dataset_id) == dataset_index_.end()) {
            throw ValidationError(where + ": unresolvable dataset id");
        }
        const ModelMeta& mm = models_[model_it->second];
        if (rec.backbone_id != mm.backbone_id) {
            throw ValidationError(where + ": backbone '" + rec.backbone_id +
                                  "' does not match model meta '" + mm.backbone_id + "'");
        }
        const bool low = std::find(kLowResolutions.begin(), kLowResolutions.end(),
                                   rec.resolution) != kLowResolutions.end();
        if (!low && rec.resolution != mm.hr_resolution) {
            throw ValidationError(where + ": resolution must be one of 16/32/64/128 or the "
                                  "model's HR resolution " + std::to_string(mm.hr_resolution));
        }
        if (rec.top1 < 0.0 || rec.top1 > 1.0) {
            throw ValidationError(where + ": top1 outside [0, 1]");
        }
        if (rec.top5 && (*rec.top5 < rec.top1 || *rec.top5 > 1.0)) {
            throw ValidationError(where + ": top5 must lie in [top1, 1]");
        }
        if (!record_index_.emplace(record_key(rec.model_id, rec.dataset_id, rec.resolution),
                                   record_index_.size()).second) {
            throw ValidationError("duplicate key at " + where);
        }
    }
}

ResultsTable ResultsTable::ingest(const std::string& records_path, TableFormat format,
                                  const std::string& datasets_path,
                                  const std::string& models_path) {
    auto records = format == TableFormat::kCsv ? read_records_csv(records_path)
                                               : read_records_json(records_path);
    return ResultsTable(std::move(records), load_dataset_meta(datasets_path),
                        load_model_meta(models_path));
}

std::vector<DatasetMeta> ResultsTable::load_dataset_meta(const std::string& path) {
    const json doc = load_json_file(path);
    if (!doc.is_array()) {
        throw ValidationError(path + ": expected an array of dataset entries");
    }
    std::vector<DatasetMeta> metas;
    for (const auto& entry : doc) {
        DatasetMeta ds;
        try {
            ds.dataset_id = entry.at("id").get<std::string>();
            ds.num_classes = entry.at("num_classes").get<int>();
        } catch (const json::exception& e) {
            throw ValidationError(path + ": " + e.what());
        }
        if (entry.contains("a_rand")) {
            const double a_rand = entry.at("a_rand").get<double>();
            const double product = a_rand * static_cast<double>(ds.num_classes);
            if (std::abs(product - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
                throw ValidationError(path + ": dataset '" + ds.dataset_id +
                                      "' a_rand * num_classes != 1");
            }
        }
        metas.push_back(std::move(ds));
    }
    return metas;
}

std::vector<ModelMeta> ResultsTable::load_model_meta(const std::string& path) {
    const json doc = load_json_file(path);
    if (!doc.is_array()) {
        throw ValidationError(path + ": expected an array of model entries");
    }
    std::vector<ModelMeta> metas;
    for (const auto& entry : doc) {
        ModelMeta mm;
        try {
            mm.model_id = entry.at("id").get<std::string>();
            mm.backbone_id = entry.at("backbone").get<std::string>();
            mm.hr_resolution = entry.at("hr_resolution").get<int>();
            if (entry.contains("param_count")) {
                mm.param_count = entry.at("param_count").get<long long>();
            }
        } catch (const json::exception& e) {
            throw ValidationError(path + ": " + e.what());
        }
        metas.push_back(std::move(mm));
    }
    return metas;
}

std::optional<double> ResultsTable::query(const std::string& model_id,
                                          const std::string& dataset_id, int resolution) const {
    const auto* rec = find(model_id, dataset_id, resolution);
    if (rec == nullptr) {
        return std::nullopt;
    }
    return rec->top1;
}

const AccuracyRecord* ResultsTable::find(const std::string& model_id,
                                         const std::string& dataset_id, int resolution) const {
    const auto it = record_index_.find(record_key(model_id, dataset_id, resolution));
    if (it == record_index_.end()) {
        return nullptr;
    }
    return &records_[it->second];
}

const DatasetMeta& ResultsTable::dataset(const std::string& dataset_id) const {
    const auto it = dataset_index_.find(dataset_id);
    if (it == dataset_index_.end()) {
        throw ValidationError("unknown dataset '" + dataset_id + "'");
    }
    return datasets_[it->second];
}

const ModelMeta& ResultsTable::model(const std::string& model_id) const {
    const auto it = model_index_.find(model_id);
    if (it == model_index_.end()) {
        throw ValidationError("unknown model '" + model_id + "'");
    }
    return models_[it->second];
}

std::vector<int> ResultsTable::resolutions_for(const std::string& model_id) const {
    std::set<int> seen;
    for (const auto& rec : records_) {
        if (rec.model_id == model_id) {
            seen.insert(rec.resolution);
        }
    }
    return {seen.begin(), seen.end()};
}

void ResultsTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << "model_id,backbone_id,dataset_id,resolution,top1,top5\n";
    for (const auto& rec : records_) {
        out << rec.model_id << ',' << rec.backbone_id << ',' << rec.dataset_id << ','
            << rec.resolution << ',' << format_double(rec.top1) << ',';
        if (rec.top5) {
            out << format_double(*rec.top5);
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

void ResultsTable::write_json(const std::string& path) const {
    json rows = json::array();
    for (const auto& rec : records_) {
        json row = {{"model_id", rec.model_id},
                    {"backbone_id", rec.backbone_id},
                    {"dataset_id", rec.dataset_id},
                    {"resolution", rec.resolution},
                    {"top1", rec.top1}};
        if (rec.top5) {
            row["top5"] = *rec.top5;
        }
        rows.push_back(std::move(row));
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << rows.dump(2) << '\n';
}

void ResultsTable::write_dataset_meta(const std::string& path) const {
    json doc = json::array();
    for (const auto& ds : datasets_) {
        doc.push_back({{"id", ds.dataset_id}, {"num_classes", ds.num_classes}});
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << doc.dump(2) << '\n';
}

void ResultsTable::write_model_meta(const std::string& path) const {
    json doc = json::array();
    for (const auto& mm : models_) {
        json row = {{"id", mm.model_id},
                    {"backbone", mm.backbone_id},
                    {"hr_resolution", mm.hr_resolution}};
        if (mm.param_count) {
            row["param_count"] = *mm.param_count;
        }
        doc.push_back(std::move(row));
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << doc.dump(2) << '\n';
}

}  // namespace lrbench
