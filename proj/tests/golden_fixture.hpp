#pragma once

// Golden fixture: the published low-accuracy robustness table (14 model /
// dataset rows, four low resolutions each). All numbers are percentages
// exactly as printed, accuracies rounded to 0.1. Expected gamma / Gamma
// columns are the printed ones; the printed accuracies are the fixture
// inputs.

#include <string>
#include <vector>

#include "lrbench/results_store.hpp"

namespace lrbench::testing {

struct GoldenCell {
    int resolution;
    double a_n;              // percent
    double gamma;            // percent, printed
    double gamma_improved;   // percent, printed
};

struct GoldenRow {
    const char* model;
    const char* backbone;
    const char* dataset;
    double a_rand;  // percent
    double a_hr;    // percent, at 224
    GoldenCell cells[4];
};

inline const std::vector<GoldenRow>& golden_rows() {
    static const std::vector<GoldenRow> rows = {
        {"ALBEF (4M)", "ALBEF-ViT", "Cars", 0.5, 2.0,
         {{16, 0.6, 28.8, 1.2}, {32, 1.0, 51.5, 2.2}, {64, 1.3, 66.2, 2.8}, {128, 1.6, 83.3, 3.5}}},
        {"ALBEF (14M+flickr)", "ALBEF-ViT", "Aircraft", 1.0, 5.7,
         {{16, 1.8, 31.7, 11.3}, {32, 3.5, 60.8, 21.7}, {64, 4.0, 70.9, 25.2}, {128, 5.2, 91.5, 32.6}}},
        {"BLIP-ViT-B/16 (129M+COCO)", "ViT-B/16", "Aircraft", 1.0, 5.3,
         {{16, 1.4, 26.6, 8.3}, {32, 3.4, 63.3, 19.8}, {64, 5.0, 94.9, 29.7}, {128, 5.1, 95.5, 29.9}}},
        {"ALBEF (14M)", "ALBEF-ViT", "Aircraft", 1.0, 3.6,
         {{16, 1.2, 33.6, 4.2}, {32, 2.2, 61.3, 7.7}, {64, 3.1, 86.6, 10.9}, {128, 3.8, 105.9, 13.3}}},
        {"ALBEF (4M)", "ALBEF-ViT", "Aircraft", 1.0, 2.7,
         {{16, 1.0, 37.1, 2.1}, {32, 1.4, 50.6, 2.8}, {64, 1.8, 66.3, 3.7}, {128, 2.3, 87.6, 4.9}}},
        {"BLIP-ViT-B/16 (129M)", "ViT-B/16", "Aircraft", 1.0, 3.8,
         {{16, 1.2, 31.7, 4.6}, {32, 1.9, 51.6, 7.5}, {64, 3.8, 100.0, 14.5}, {128, 4.3, 115.1, 16.7}}},
        {"ALBEF (14M+coco)", "ALBEF-ViT", "Aircraft", 1.0, 6.1,
         {{16, 1.6, 27.1, 11.0}, {32, 3.8, 61.6, 25.0}, {64, 5.5, 90.1, 36.7}, {128, 5.8, 95.1, 38.7}}},
        {"BLIP-ViT-B/16 (4M)", "ViT-B/16", "Aircraft", 1.0, 6.6,
         {{16, 1.6, 23.6, 11.1}, {32, 2.9, 43.2, 20.2}, {64, 4.8, 72.7, 34.1}, {128, 6.0, 90.5, 42.4}}},
        {"BLIP-ViT-L/16 (129M+Flickr)", "ViT-L/16", "Aircraft", 1.0, 5.9,
         {{16, 1.9, 31.8, 12.4}, {32, 2.8, 47.5, 18.4}, {64, 4.7, 79.3, 30.8}, {128, 4.9, 82.3, 32.0}}},
        {"BLIP-ViT-B/16 CapFilt-L (129M)", "ViT-B/16", "Aircraft", 1.0, 5.0,
         {{16, 1.4, 27.5, 7.6}, {32, 2.6, 52.1, 14.4}, {64, 3.8, 75.4, 20.9}, {128, 4.3, 86.2, 23.9}}},
        {"BLIP-ViT-B/16 (129M+Flickr)", "ViT-B/16", "Aircraft", 1.0, 4.8,
         {{16, 1.8, 36.9, 9.3}, {32, 3.7, 76.2, 19.3}, {64, 4.9, 101.3, 25.6}, {128, 5.0, 103.8, 26.3}}},
        {"BLIP-ViT-L/16 (129M)", "ViT-L/16", "Aircraft", 1.0, 5.3,
         {{16, 2.0, 37.6, 11.9}, {32, 3.4, 64.0, 20.3}, {64, 5.0, 94.4, 29.8}, {128, 5.8, 107.9, 34.1}}},
        {"ALBEF (14M)", "ALBEF-ViT", "EuroSAT", 10.0, 17.4,
         {{16, 17.3, 99.1, 66.3}, {32, 15.7, 89.7, 60.1}, {64, 17.8, 102.1, 68.4}, {128, 20.7, 118.8, 79.5}}},
        {"ALBEF (4M)", "ALBEF-ViT", "EuroSAT", 10.0, 19.4,
         {{16, 7.7, 39.8, 32.9}, {32, 11.3, 58.6, 48.5}, {64, 19.0, 97.9, 81.0}, {128, 20.0, 103.5, 85.6}}},
    };
    return rows;
}

inline ResultsTable golden_table() {
    std::vector<AccuracyRecord> records;
    std::vector<DatasetMeta> datasets = {
        {"Cars", 196}, {"Aircraft", 100}, {"EuroSAT", 10}};
    std::vector<ModelMeta> models;
    const auto add_model = [&models](const std::string& id, const std::string& backbone) {
        for (const auto& m : models) {
            if (m.model_id == id) {
                return;
            }
        }
        models.push_back({id, backbone, 224, std::nullopt});
    };
    const auto add_record = [&records](const std::string& model, const std::string& backbone,
                                       const std::string& dataset, int res, double percent) {
        for (const auto& r : records) {
            if (r.model_id == model && r.dataset_id == dataset && r.resolution == res) {
                return;  // HR cells shared between rows of the same pair
            }
        }
        records.push_back({model, backbone, dataset, res, percent / 100.0, std::nullopt});
    };
    for (const auto& row : golden_rows()) {
        add_model(row.model, row.backbone);
        add_record(row.model, row.backbone, row.dataset, 224, row.a_hr);
        for (const auto& cell : row.cells) {
            add_record(row.model, row.backbone, row.dataset, cell.resolution, cell.a_n);
        }
    }
    return ResultsTable(std::move(records), std::move(datasets), std::move(models));
}

// CSV fixture in percent mode plus the two meta files; for CLI-level tests.
inline std::string golden_records_csv() {
    std::string csv = "# unit=percent\nmodel_id,backbone_id,dataset_id,resolution,top1\n";
    const auto table = golden_table();
    for (const auto& rec : table.records()) {
        csv += rec.model_id + ',' + rec.backbone_id + ',' + rec.dataset_id + ',' +
               std::to_string(rec.resolution) + ',' + std::to_string(rec.top1 * 100.0) + '\n';
    }
    return csv;
}

inline std::string golden_datasets_json() {
    return R"([
  {"id": "Cars", "num_classes": 196},
  {"id": "Aircraft", "num_classes": 100},
  {"id": "EuroSAT", "num_classes": 10}
])";
}

inline std::string golden_models_json() {
    std::string out = "[\n";
    const auto table = golden_table();
    for (std::size_t i = 0; i < table.models().size(); ++i) {
        const auto& m = table.models()[i];
        out += "  {\"id\": \"" + m.model_id + "\", \"backbone\": \"" + m.backbone_id +
               "\", \"hr_resolution\": 224}";
        out += i + 1 < table.models().size() ? ",\n" : "\n";
    }
    out += "]\n";
    return out;
}

}  // namespace lrbench::testing
