#include "hoidet/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hoidet {

namespace {

constexpr const char* kDatasetMagic = "hoidet-dataset v1";
constexpr const char* kRasterMagic = "hoidet-raster v1";
constexpr const char* kPredictionsMagic = "hoidet-predictions v1";
constexpr const char* kQueriesMagic = "hoidet-queries v1";
constexpr const char* kCheckpointMagic = "hoidet-checkpoint v1";

/// Line-oriented reader that tracks position for error messages and
/// splits each line into whitespace-separated tokens.
class LineReader {
public:
    LineReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw std::invalid_argument(path + ": cannot open file");
    }

    bool next(std::vector<std::string>& tokens) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            tokens.clear();
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok) tokens.push_back(tok);
            if (!tokens.empty()) return true;  // blank lines are tolerated
        }
        return false;
    }

    std::vector<std::string> expect(const std::string& head, size_t min_tokens) {
        std::vector<std::string> tokens;
        if (!next(tokens)) fail("unexpected end of file, expected '" + head + "'");
        if (tokens[0] != head) fail("expected '" + head + "', found '" + tokens[0] + "'");
        if (tokens.size() < min_tokens) fail("'" + head + "' record is too short");
        return tokens;
    }

    void expect_magic(const std::string& magic) {
        std::vector<std::string> tokens;
        if (!next(tokens)) fail("empty file, expected '" + magic + "' header");
        std::string joined = tokens[0];
        for (size_t i = 1; i < tokens.size(); ++i) joined += " " + tokens[i];
        if (joined != magic) fail("bad header '" + joined + "', expected '" + magic + "'");
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw std::invalid_argument(path_ + ":" + std::to_string(line_no_) + ": " + message);
    }

    int parse_int(const std::string& tok) const {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            fail("not an integer: '" + tok + "'");
        }
        return v;
    }

    double parse_real(const std::string& tok) const {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            fail("not a number: '" + tok + "'");
        }
        return v;
    }

private:
    std::string path_;
    std::ifstream in_;
    int line_no_ = 0;
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << content;
    if (!out) throw std::runtime_error(path + ": write failed");
}

void check_unit_interval(const LineReader& reader, double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) {
        reader.fail(std::string(what) + " outside [0, 1]");
    }
}

NormBox parse_box(const LineReader& reader, const std::vector<std::string>& tokens, size_t at,
                  const char* what) {
    NormBox b;
    b.cx = reader.parse_real(tokens[at]);
    b.cy = reader.parse_real(tokens[at + 1]);
    b.w = reader.parse_real(tokens[at + 2]);
    b.h = reader.parse_real(tokens[at + 3]);
    check_unit_interval(reader, b.cx, what);
    check_unit_interval(reader, b.cy, what);
    check_unit_interval(reader, b.w, what);
    check_unit_interval(reader, b.h, what);
    return b;
}

std::string box_fields(const NormBox& b) {
    return format_real(b.cx) + " " + format_real(b.cy) + " " + format_real(b.w) + " " +
           format_real(b.h);
}

}  // namespace

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
    return std::string(buf, ptr);
}

Dataset dataset_from_synth(const SynthDataset& synth) {
    Dataset ds;
    ds.header.n_obj = synth.n_obj_classes;
    ds.header.n_act = synth.n_act_classes;
    ds.header.object_names = synth.object_names;
    ds.header.action_names = synth.action_names;
    ds.header.train_counts = synth.hoi_counts;
    for (const SynthImage& img : synth.images) {
        ImageRecord rec;
        rec.id = img.id;
        rec.gts = img.gts;
        rec.raster = img.raster;
        ds.images.push_back(std::move(rec));
    }
    return ds;
}

void write_raster(const std::string& path, const Tensor& raster) {
    if (raster.shape.size() != 3) {
        throw std::invalid_argument("write_raster: raster must be [channels, h, w]");
    }
    const int c = raster.shape[0], h = raster.shape[1], w = raster.shape[2];
    std::string out = std::string(kRasterMagic) + "\n" + std::to_string(c) + " " +
                      std::to_string(h) + " " + std::to_string(w) + "\n";
    size_t idx = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x, ++idx) {
                const double v = raster.data[idx];
                const int q = std::clamp(static_cast<int>(std::lround(v * 255.0)), 0, 255);
                out += std::to_string(q);
                out += (x + 1 == w) ? '\n' : ' ';
            }
        }
    }
    write_file(path, out);
}

Tensor read_raster(const std::string& path) {
    LineReader reader(path);
    reader.expect_magic(kRasterMagic);
    std::vector<std::string> dims;
    if (!reader.next(dims) || dims.size() != 3) {
        reader.fail("expected 'channels height width' dimension line");
    }
    const int c = reader.parse_int(dims[0]);
    const int h = reader.parse_int(dims[1]);
    const int w = reader.parse_int(dims[2]);
    if (c < 1 || h < 1 || w < 1) reader.fail("raster dimensions must be >= 1");
    Tensor t({c, h, w});
    size_t idx = 0;
    std::vector<std::string> row;
    for (int line = 0; line < c * h; ++line) {
        if (!reader.next(row)) reader.fail("raster data ended early");
        if (row.size() != static_cast<size_t>(w)) reader.fail("raster row has the wrong width");
        for (const std::string& tok : row) {
            const int q = reader.parse_int(tok);
            if (q < 0 || q > 255) reader.fail("raster values must be 0..255");
            t.data[idx++] = static_cast<double>(q) / 255.0;
        }
    }
    return t;
}

void write_dataset(const std::string& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    const DatasetHeader& h = ds.header;
    if (h.n_obj < 1 || h.n_act < 1) {
        throw std::invalid_argument("write_dataset: class counts must be >= 1");
    }
    if (h.object_names.size() != static_cast<size_t>(h.n_obj) ||
        h.action_names.size() != static_cast<size_t>(h.n_act) ||
        h.train_counts.size() != static_cast<size_t>(h.n_obj * h.n_act)) {
        throw std::invalid_argument("write_dataset: header table sizes mismatch");
    }
    fs::create_directories(dir);

    std::string out = std::string(kDatasetMagic) + "\n";
    out += "classes " + std::to_string(h.n_obj) + " " + std::to_string(h.n_act) + "\n";
    for (int i = 0; i < h.n_obj; ++i) {
        out += "object " + std::to_string(i) + " " + h.object_names[static_cast<size_t>(i)] + "\n";
    }
    for (int i = 0; i < h.n_act; ++i) {
        out += "action " + std::to_string(i) + " " + h.action_names[static_cast<size_t>(i)] + "\n";
    }
    for (int o = 0; o < h.n_obj; ++o) {
        for (int a = 0; a < h.n_act; ++a) {
            out += "count " + std::to_string(o) + " " + std::to_string(a) + " " +
                   std::to_string(h.train_counts[static_cast<size_t>(o * h.n_act + a)]) + "\n";
        }
    }
    for (const ImageRecord& img : ds.images) {
        const bool has_raster = !img.raster.data.empty();
        const std::string raster_name = has_raster ? img.id + ".raster" : "-";
        out += "image " + img.id + " " + raster_name + " " + std::to_string(img.gts.size()) + "\n";
        for (const GtInstance& gt : img.gts) {
            out += "gt " + box_fields(gt.human_box) + " " + box_fields(gt.object_box) + " " +
                   std::to_string(gt.object_class);
            for (const double a : gt.actions) {
                out += a == 1.0 ? " 1" : " 0";
            }
            out += "\n";
        }
        if (has_raster) {
            write_raster((fs::path(dir) / raster_name).string(), img.raster);
        }
    }
    write_file((fs::path(dir) / "dataset.txt").string(), out);
}

Dataset read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string path = (fs::path(dir) / "dataset.txt").string();
    LineReader reader(path);
    reader.expect_magic(kDatasetMagic);

    Dataset ds;
    DatasetHeader& h = ds.header;
    {
        const auto tokens = reader.expect("classes", 3);
        h.n_obj = reader.parse_int(tokens[1]);
        h.n_act = reader.parse_int(tokens[2]);
        if (h.n_obj < 1 || h.n_act < 1) reader.fail("class counts must be >= 1");
    }
    h.object_names.resize(static_cast<size_t>(h.n_obj));
    for (int i = 0; i < h.n_obj; ++i) {
        const auto tokens = reader.expect("object", 3);
        const int id = reader.parse_int(tokens[1]);
        if (id != i) reader.fail("object names must appear in id order");
        h.object_names[static_cast<size_t>(i)] = tokens[2];
    }
    h.action_names.resize(static_cast<size_t>(h.n_act));
    for (int i = 0; i < h.n_act; ++i) {
        const auto tokens = reader.expect("action", 3);
        const int id = reader.parse_int(tokens[1]);
        if (id != i) reader.fail("action names must appear in id order");
        h.action_names[static_cast<size_t>(i)] = tokens[2];
    }
    h.train_counts.assign(static_cast<size_t>(h.n_obj * h.n_act), 0);
    for (int o = 0; o < h.n_obj; ++o) {
        for (int a = 0; a < h.n_act; ++a) {
            const auto tokens = reader.expect("count", 4);
            const int to = reader.parse_int(tokens[1]);
            const int ta = reader.parse_int(tokens[2]);
            const int n = reader.parse_int(tokens[3]);
            if (to != o || ta != a) reader.fail("counts must appear in (object, action) order");
            if (n < 0) reader.fail("negative training count");
            h.train_counts[static_cast<size_t>(o * h.n_act + a)] = n;
        }
    }

    std::vector<std::string> tokens;
    while (reader.next(tokens)) {
        if (tokens[0] != "image" || tokens.size() < 4) reader.fail("expected an 'image' record");
        ImageRecord img;
        img.id = tokens[1];
        const std::string raster_name = tokens[2];
        const int n_gts = reader.parse_int(tokens[3]);
        if (n_gts < 0) reader.fail("negative instance count");
        for (int i = 0; i < n_gts; ++i) {
            const auto gt_tokens = reader.expect("gt", 10 + static_cast<size_t>(h.n_act));
            if (gt_tokens.size() != 10 + static_cast<size_t>(h.n_act)) {
                reader.fail("'gt' record has the wrong field count");
            }
            GtInstance gt;
            gt.human_box = parse_box(reader, gt_tokens, 1, "human box coordinate");
            gt.object_box = parse_box(reader, gt_tokens, 5, "object box coordinate");
            gt.object_class = reader.parse_int(gt_tokens[9]);
            if (gt.object_class < 0 || gt.object_class >= h.n_obj) {
                reader.fail("ground-truth object class out of range");
            }
            gt.actions.resize(static_cast<size_t>(h.n_act));
            for (int a = 0; a < h.n_act; ++a) {
                const int v = reader.parse_int(gt_tokens[10 + static_cast<size_t>(a)]);
                if (v != 0 && v != 1) reader.fail("action labels must be 0 or 1");
                gt.actions[static_cast<size_t>(a)] = v;
            }
            img.gts.push_back(std::move(gt));
        }
        if (raster_name != "-") {
            img.raster = read_raster((fs::path(dir) / raster_name).string());
        }
        ds.images.push_back(std::move(img));
    }
    return ds;
}

void write_predictions(const std::string& path, const PredictionSet& preds) {
    if (preds.image_ids.size() != preds.detections.size()) {
        throw std::invalid_argument("write_predictions: id/detection list size mismatch");
    }
    std::string out = std::string(kPredictionsMagic) + "\n";
    for (size_t i = 0; i < preds.image_ids.size(); ++i) {
        out += "image " + preds.image_ids[i] + " " + std::to_string(preds.detections[i].size()) +
               "\n";
        for (const HoiDetection& d : preds.detections[i]) {
            out += "det " + box_fields(d.human_box) + " " + box_fields(d.object_box) + " " +
                   std::to_string(d.object_class) + " " + std::to_string(d.action_class) + " " +
                   format_real(d.score) + " " + std::to_string(d.query_index) + "\n";
        }
    }
    write_file(path, out);
}

PredictionSet read_predictions(const std::string& path) {
    LineReader reader(path);
    reader.expect_magic(kPredictionsMagic);
    PredictionSet preds;
    std::vector<std::string> tokens;
    while (reader.next(tokens)) {
        if (tokens[0] != "image" || tokens.size() < 3) reader.fail("expected an 'image' record");
        preds.image_ids.push_back(tokens[1]);
        const int n = reader.parse_int(tokens[2]);
        if (n < 0) reader.fail("negative detection count");
        std::vector<HoiDetection> dets;
        for (int i = 0; i < n; ++i) {
            const auto det_tokens = reader.expect("det", 13);
            HoiDetection d;
            d.human_box = parse_box(reader, det_tokens, 1, "human box coordinate");
            d.object_box = parse_box(reader, det_tokens, 5, "object box coordinate");
            d.object_class = reader.parse_int(det_tokens[9]);
            d.action_class = reader.parse_int(det_tokens[10]);
            d.score = reader.parse_real(det_tokens[11]);
            d.query_index = reader.parse_int(det_tokens[12]);
            if (d.object_class < 0 || d.action_class < 0) reader.fail("negative class index");
            if (!(d.score >= 0.0 && d.score <= 1.0)) reader.fail("score outside [0, 1]");
            dets.push_back(d);
        }
        preds.detections.push_back(std::move(dets));
    }
    return preds;
}

void write_queries(const std::string& path, const QuerySet& queries) {
    if (queries.image_ids.size() != queries.predictions.size()) {
        throw std::invalid_argument("write_queries: id/prediction list size mismatch");
    }
    std::string out = std::string(kQueriesMagic) + "\n";
    out += "classes " + std::to_string(queries.n_obj) + " " + std::to_string(queries.n_act) + "\n";
    for (size_t i = 0; i < queries.image_ids.size(); ++i) {
        out += "image " + queries.image_ids[i] + " " +
               std::to_string(queries.predictions[i].size()) + "\n";
        for (const Prediction& p : queries.predictions[i]) {
            if (p.object_probs.size() != static_cast<size_t>(queries.n_obj + 1) ||
                p.action_probs.size() != static_cast<size_t>(queries.n_act)) {
                throw std::invalid_argument("write_queries: prediction vector sizes mismatch");
            }
            out += "query " + box_fields(p.human_box) + " " + box_fields(p.object_box);
            for (const double c : p.object_probs) out += " " + format_real(c);
            for (const double a : p.action_probs) out += " " + format_real(a);
            out += "\n";
        }
    }
    write_file(path, out);
}

QuerySet read_queries(const std::string& path) {
    LineReader reader(path);
    reader.expect_magic(kQueriesMagic);
    QuerySet queries;
    {
        const auto tokens = reader.expect("classes", 3);
        queries.n_obj = reader.parse_int(tokens[1]);
        queries.n_act = reader.parse_int(tokens[2]);
        if (queries.n_obj < 1 || queries.n_act < 1) reader.fail("class counts must be >= 1");
    }
    const size_t fields = 9 + static_cast<size_t>(queries.n_obj + 1 + queries.n_act);
    std::vector<std::string> tokens;
    while (reader.next(tokens)) {
        if (tokens[0] != "image" || tokens.size() < 3) reader.fail("expected an 'image' record");
        queries.image_ids.push_back(tokens[1]);
        const int n = reader.parse_int(tokens[2]);
        if (n < 0) reader.fail("negative query count");
        std::vector<Prediction> preds;
        for (int i = 0; i < n; ++i) {
            const auto q_tokens = reader.expect("query", fields);
            if (q_tokens.size() != fields) reader.fail("'query' record has the wrong field count");
            Prediction p;
            p.human_box = parse_box(reader, q_tokens, 1, "human box coordinate");
            p.object_box = parse_box(reader, q_tokens, 5, "object box coordinate");
            size_t at = 9;
            p.object_probs.resize(static_cast<size_t>(queries.n_obj + 1));
            for (double& c : p.object_probs) {
                c = reader.parse_real(q_tokens[at++]);
                check_unit_interval(reader, c, "object probability");
            }
            p.action_probs.resize(static_cast<size_t>(queries.n_act));
            for (double& a : p.action_probs) {
                a = reader.parse_real(q_tokens[at++]);
                check_unit_interval(reader, a, "action probability");
            }
            preds.push_back(std::move(p));
        }
        queries.predictions.push_back(std::move(preds));
    }
    return queries;
}

void write_checkpoint(const std::string& path, const ParamSet& params) {
    std::string out = std::string(kCheckpointMagic) + "\n";
    out += "params " + std::to_string(params.names.size()) + "\n";
    for (size_t i = 0; i < params.names.size(); ++i) {
        const Tensor& t = params.values[i];
        out += "param " + params.names[i] + " " + std::to_string(t.shape.size());
        for (const int d : t.shape) out += " " + std::to_string(d);
        out += "\n";
        std::string values = "values";
        for (const double v : t.data) values += " " + format_real(v);
        out += values + "\n";
    }
    write_file(path, out);
}

ParamSet read_checkpoint(const std::string& path) {
    LineReader reader(path);
    reader.expect_magic(kCheckpointMagic);
    ParamSet params;
    const auto head = reader.expect("params", 2);
    const int n = reader.parse_int(head[1]);
    if (n < 0) reader.fail("negative parameter count");
    for (int i = 0; i < n; ++i) {
        const auto tokens = reader.expect("param", 3);
        const std::string& name = tokens[1];
        const int rank = reader.parse_int(tokens[2]);
        if (rank < 1 || rank > 4) reader.fail("parameter rank must be 1..4");
        if (tokens.size() != 3 + static_cast<size_t>(rank)) reader.fail("shape field count");
        std::vector<int> shape(static_cast<size_t>(rank));
        for (int d = 0; d < rank; ++d) {
            shape[static_cast<size_t>(d)] = reader.parse_int(tokens[3 + static_cast<size_t>(d)]);
            if (shape[static_cast<size_t>(d)] < 1) reader.fail("shape entries must be >= 1");
        }
        Tensor t(shape);
        const auto value_tokens = reader.expect("values", 1 + t.numel());
        if (value_tokens.size() != 1 + t.numel()) reader.fail("value count mismatch");
        for (size_t j = 0; j < t.numel(); ++j) {
            t.data[j] = reader.parse_real(value_tokens[1 + j]);
        }
        if (params.index_of(name) != -1) reader.fail("duplicate parameter name '" + name + "'");
        params.add(name, std::move(t));
    }
    return params;
}

}  // namespace hoidet
