#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "semloc/pose.hpp"

namespace semloc {

// Thrown by map / config file readers; carries the 1-based line of the offence.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, int line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const { return file_; }
    int line() const { return line_; }

private:
    std::string file_;
    int line_;
};

using LabelId = int16_t;

constexpr LabelId kLabelFree = 0;
constexpr LabelId kLabelOthers = 1;
constexpr LabelId kCellFree = -1;  // physical layer: no obstacle

// Ordered label table. Ids are contiguous from 0; 0 = free space, 1 = others.
class ClassTable {
public:
    ClassTable() = default;

    // Labels beyond the two reserved ones, in id order starting at 2.
    static ClassTable with_labels(const std::vector<std::string>& extra);

    void add(LabelId id, const std::string& name);

    int size() const { return static_cast<int>(names_.size()); }
    bool contains(LabelId id) const { return id >= 0 && id < size(); }
    const std::string& name(LabelId id) const;
    std::optional<LabelId> find(const std::string& name) const;

private:
    std::vector<std::string> names_;
};

// Exact Euclidean distance (meters) to the nearest cell carrying a target
// label, clamped to d_max. Values live on cell centers.
struct DistanceField {
    int width = 0;
    int height = 0;
    double resolution = 0.0;
    double d_max = 0.0;
    std::vector<double> dist;  // row-major, dist[cy * width + cx]

    double at(int cx, int cy) const { return dist[static_cast<size_t>(cy) * width + cx]; }
};

struct CellIndex {
    int x = 0;
    int y = 0;
};

// 2D grid with a physical occupancy layer and a semantic label layer.
// Spatial classes (no-entry lines, open doors) may label physically free
// cells; they never block ray casting and never feed the occupancy field.
class SemanticGridMap {
public:
    SemanticGridMap() = default;
    SemanticGridMap(int width, int height, double resolution, Pose2D origin, ClassTable classes);

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    const Pose2D& origin() const { return origin_; }
    const ClassTable& classes() const { return classes_; }
    int cell_count() const { return width_ * height_; }

    // Physical layer: kCellFree or the occupying label id.
    LabelId physical(int cx, int cy) const { return physical_[index(cx, cy)]; }
    // Semantic layer: kLabelFree or a label id (may mark free cells).
    LabelId semantic(int cx, int cy) const { return semantic_[index(cx, cy)]; }

    bool occupied(int cx, int cy) const { return physical_[index(cx, cy)] != kCellFree; }

    // Writes both layers; occupied cells must carry a non-free semantic label.
    void set_cell(int cx, int cy, LabelId physical, LabelId semantic);

    bool in_bounds(int cx, int cy) const {
        return cx >= 0 && cx < width_ && cy >= 0 && cy < height_;
    }

    std::optional<CellIndex> world_to_cell(const Point2D& p) const;
    Point2D cell_to_world(const CellIndex& c) const;  // cell center

    // Exact two-pass Euclidean distance transform per requested label over the
    // semantic layer, plus one field over all physically occupied cells.
    // A label with no instances yields a constant d_max field.
    void build_distance_fields(const std::vector<LabelId>& labels, double d_max);
    void build_all_distance_fields(double d_max);

    bool has_field(LabelId label) const { return fields_.count(label) > 0; }
    const DistanceField& field(LabelId label) const;
    bool has_occupancy_field() const { return occupancy_field_.has_value(); }
    const DistanceField& occupancy_field() const;

    // Distance (meters) at a world point against a label's field; points
    // outside the map return d_max. Nearest-cell lookup by default, bilinear
    // when the flag is set.
    double closest_distance(LabelId label, const Point2D& p, bool bilinear = false) const;
    double closest_obstacle_distance(const Point2D& p, bool bilinear = false) const;

    const std::vector<LabelId>& physical_layer() const { return physical_; }
    const std::vector<LabelId>& semantic_layer() const { return semantic_; }

    static SemanticGridMap load(const std::string& path);
    void save(const std::string& path) const;

    bool operator==(const SemanticGridMap& other) const;

private:
    size_t index(int cx, int cy) const { return static_cast<size_t>(cy) * width_ + cx; }
    void check_label(LabelId id) const;

    int width_ = 0;
    int height_ = 0;
    double resolution_ = 0.0;
    Pose2D origin_;
    ClassTable classes_;
    std::vector<LabelId> physical_;
    std::vector<LabelId> semantic_;
    std::map<LabelId, DistanceField> fields_;
    std::optional<DistanceField> occupancy_field_;
};

// Exact squared Euclidean distance transform (grid units) of a binary mask.
// Exposed separately so construction can be checked against brute force.
std::vector<double> squared_distance_transform(const std::vector<uint8_t>& mask, int width,
                                               int height);

}  // namespace semloc
