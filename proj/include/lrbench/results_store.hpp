#pragma once

// Accuracy table store: per (model, dataset, resolution) top-1 accuracy plus
// the dataset/model metadata needed by the robustness metrics. Tables are
// built once by ingest() and immutable afterwards, so concurrent readers need
// no synchronization.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lrbench {

struct AccuracyRecord {
    std::string model_id;
    std::string backbone_id;
    std::string dataset_id;
    int resolution = 0;         // square side in pixels
    double top1 = 0.0;          // fraction in [0, 1]
    std::optional<double> top5;

    bool operator==(const AccuracyRecord&) const = default;
};

struct DatasetMeta {
    std::string dataset_id;
    int num_classes = 0;

    // Random-guess accuracy 1/C.
    double a_rand() const { return 1.0 / static_cast<double>(num_classes); }

    bool operator==(const DatasetMeta&) const = default;
};

struct ModelMeta {
    std::string model_id;
    std::string backbone_id;
    int hr_resolution = 0;
    std::optional<long long> param_count;

    bool operator==(const ModelMeta&) const = default;
};

enum class TableFormat { kCsv, kJson };

class ResultsTable {
  public:
    ResultsTable() = default;

    // Validating constructor; throws ValidationError on any invariant breach.
    ResultsTable(std::vector<AccuracyRecord> records,
                 std::vector<DatasetMeta> datasets,
                 std::vector<ModelMeta> models);

    // Reads the records file (CSV or JSON, see README for the schema) and the
    // two meta files, validates everything, and returns the frozen table.
    static ResultsTable ingest(const std::string& records_path, TableFormat format,
                               const std::string& datasets_path,
                               const std::string& models_path);

    static std::vector<DatasetMeta> load_dataset_meta(const std::string& path);
    static std::vector<ModelMeta> load_model_meta(const std::string& path);

    // Absence is not an error; metric code skips absent cells.
    std::optional<double> query(const std::string& model_id, const std::string& dataset_id,
                                int resolution) const;
    const AccuracyRecord* find(const std::string& model_id, const std::string& dataset_id,
                               int resolution) const;

    const std::vector<AccuracyRecord>& records() const { return records_; }
    const std::vector<DatasetMeta>& datasets() const { return datasets_; }
    const std::vector<ModelMeta>& models() const { return models_; }

    const DatasetMeta& dataset(const std::string& dataset_id) const;
    const ModelMeta& model(const std::string& model_id) const;

    // Number of (model, dataset, resolution) triples present.
    std::size_t coverage() const { return records_.size(); }

    // Resolutions with at least one record for the given model.
    std::vector<int> resolutions_for(const std::string& model_id) const;

    void write_csv(const std::string& path) const;
    void write_json(const std::string& path) const;
    void write_dataset_meta(const std::string& path) const;
    void write_model_meta(const std::string& path) const;

    bool operator==(const ResultsTable& other) const {
        return records_ == other.records_ && datasets_ == other.datasets_ &&
               models_ == other.models_;
    }

  private:
    void validate();

    std::vector<AccuracyRecord> records_;
    std::vector<DatasetMeta> datasets_;
    std::vector<ModelMeta> models_;
    std::map<std::string, std::size_t> dataset_index_;
    std::map<std::string, std::size_t> model_index_;
    std::map<std::string, std::size_t> record_index_;  // key: model\x1fdataset\x1fres
};

}  // namespace lrbench
