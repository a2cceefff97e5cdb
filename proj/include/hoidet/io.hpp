#pragma once

#include <string>
#include <vector>

#include "hoidet/assignment.hpp"
#include "hoidet/inference.hpp"
#include "hoidet/model.hpp"
#include "hoidet/synth.hpp"

namespace hoidet {

/// All on-disk containers are line-delimited text with an explicit
/// version header. Reals are written in shortest round-trip form, so
/// write-then-read is exact. Malformed input throws std::invalid_argument
/// naming the file and line; filesystem write failures throw
/// std::runtime_error.

struct DatasetHeader {
    int n_obj = 0;
    int n_act = 0;
    std::vector<std::string> object_names;
    std::vector<std::string> action_names;
    std::vector<int> train_counts;  // [n_obj * n_act], for the rare split
};

struct ImageRecord {
    std::string id;
    std::vector<GtInstance> gts;
    Tensor raster;  // [3, h, w] in [0, 1], or empty when the image has none
};

struct Dataset {
    DatasetHeader header;
    std::vector<ImageRecord> images;
};

Dataset dataset_from_synth(const SynthDataset& synth);

/// Writes dir/dataset.txt plus one dir/<id>.raster sidecar per image that
/// carries a raster. Creates the directory if needed.
void write_dataset(const std::string& dir, const Dataset& ds);
Dataset read_dataset(const std::string& dir);

/// Rasters are stored as integer grids 0..255 (values quantized from
/// [0, 1] and read back as value/255).
void write_raster(const std::string& path, const Tensor& raster);
Tensor read_raster(const std::string& path);

struct PredictionSet {
    std::vector<std::string> image_ids;
    std::vector<std::vector<HoiDetection>> detections;
};

void write_predictions(const std::string& path, const PredictionSet& preds);
PredictionSet read_predictions(const std::string& path);

/// Raw per-query model outputs (full probability vectors), the input the
/// matching and loss calculators need.
struct QuerySet {
    int n_obj = 0;
    int n_act = 0;
    std::vector<std::string> image_ids;
    std::vector<std::vector<Prediction>> predictions;
};

void write_queries(const std::string& path, const QuerySet& queries);
QuerySet read_queries(const std::string& path);

/// Flat named-tensor container: every parameter as name, shape, and
/// row-major values.
void write_checkpoint(const std::string& path, const ParamSet& params);
ParamSet read_checkpoint(const std::string& path);

/// Shortest round-trip decimal form of a real (std::to_chars).
std::string format_real(double v);

}  // namespace hoidet
