#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cellpeel/masking.hpp"
#include "cellpeel/peel.hpp"
#include "cellpeel/quantify.hpp"
#include "cellpeel/segment2d.hpp"
#include "cellpeel/shells.hpp"
#include "cellpeel/tracking.hpp"

namespace cellpeel {

// JSON documents exchanged between the CLI, the HTTP API and session files.
//
//   annotations: {"version":1,"axis":"y","dims":[nx,ny,nz],
//                 "slices":[{"index":k,"outer":[[x,z],...],"inner":[[x,z],...]|null}]}
//   seeds:       {"seeds":[{"row":r,"col":c,"label":l,"src":"auto"|"manual"}],"next_label":n}
//   furrow:      {"points":[[row,col],...]}

nlohmann::json annotations_to_json(const AnnotationSet& set);
AnnotationSet annotations_from_json(const nlohmann::json& j);

nlohmann::json seeds_to_json(const SeedSet& seeds);
SeedSet seeds_from_json(const nlohmann::json& j);

nlohmann::json furrow_to_json(const FurrowLine& furrow);
FurrowLine furrow_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes through a temporary file and a rename so a crash never leaves a
/// half-written document behind.
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);
SeedSet load_seeds(const std::filesystem::path& path);
void save_seeds(const SeedSet& seeds, const std::filesystem::path& path);
FurrowLine load_furrow(const std::filesystem::path& path);
void save_furrow(const FurrowLine& furrow, const std::filesystem::path& path);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// `track_id,frame,label,cx,cy,cz,status`
std::string tracks_to_csv(const TrackTable& table);
TrackTable tracks_from_csv(const std::string& text);
void save_tracks(const TrackTable& table, const std::filesystem::path& path);
TrackTable load_tracks(const std::filesystem::path& path);

/// `track_id,frame,feature,value,unit`
std::string features_to_csv(const FeatureTable& table);
FeatureTable features_from_csv(const std::string& text);
void save_features(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable load_features(const std::filesystem::path& path);

/// Peel images are stored as one 16-bit TIFF page with three planar samples:
/// intensity (rounded), metric in thousandths of a pixel, and valid (0/255).
/// Row lengths, first slice and spacing go to the sidecar. With `separate`
/// the channels are written to `<stem>_intensity.tif`, `<stem>_metric.tif`
/// and `<stem>_valid.tif` instead, which most viewers open directly.
void save_peel(const PeelImage& peel, const std::filesystem::path& path, bool separate = false);
PeelImage load_peel(const std::filesystem::path& path);

/// Intensity channel as a 2D image for segmentation.
Image2D<double> peel_intensity(const PeelImage& peel);

/// Batch defaults, read from a JSON file whose keys mirror the fields.
struct PipelineConfig {
  std::string input_pattern;  // printf-style, one file per frame
  std::optional<Spacing> spacing;
  ShellParams shell;
  SegParams seg;
  TrackParams track;
  QuantifyParams quantify;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

/// Expands a printf-style `%d`/`%03d` pattern for one frame number.
std::string expand_frame_pattern(const std::string& pattern, std::size_t frame);

}  // namespace cellpeel
