#include "semloc/semantic_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace semloc {

ClassTable ClassTable::with_labels(const std::vector<std::string>& extra) {
    ClassTable t;
    t.add(kLabelFree, "free");
    t.add(kLabelOthers, "others");
    LabelId next = 2;
    for (const auto& name : extra)
        t.add(next++, name);
    return t;
}

void ClassTable::add(LabelId id, const std::string& name) {
    if (id != static_cast<LabelId>(names_.size()))
        throw std::invalid_argument("class ids must be contiguous from 0, got id " +
                                    std::to_string(id));
    if (find(name).has_value())
        throw std::invalid_argument("duplicate class name '" + name + "'");
    names_.push_back(name);
}

const std::string& ClassTable::name(LabelId id) const {
    if (!contains(id))
        throw std::out_of_range("unknown class id " + std::to_string(id));
    return names_[id];
}

std::optional<LabelId> ClassTable::find(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name)
            return static_cast<LabelId>(i);
    return std::nullopt;
}

SemanticGridMap::SemanticGridMap(int width, int height, double resolution, Pose2D origin,
                                 ClassTable classes)
    : width_(width),
      height_(height),
      resolution_(resolution),
      origin_(origin),
      classes_(std::move(classes)),
      physical_(static_cast<size_t>(width) * height, kCellFree),
      semantic_(static_cast<size_t>(width) * height, kLabelFree) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("nonpositive map dimensions");
    if (resolution <= 0.0)
        throw std::invalid_argument("nonpositive resolution");
    if (classes_.size() < 2)
        throw std::invalid_argument("class table must contain the reserved free/others labels");
}

void SemanticGridMap::check_label(LabelId id) const {
    if (!classes_.contains(id))
        throw std::out_of_range("label id " + std::to_string(id) + " not in class table");
}

void SemanticGridMap::set_cell(int cx, int cy, LabelId physical, LabelId semantic) {
    if (!in_bounds(cx, cy))
        throw std::out_of_range("cell out of bounds");
    if (physical != kCellFree) {
        check_label(physical);
        if (semantic == kLabelFree)
            throw std::invalid_argument("occupied cell requires a non-free semantic label");
    }
    check_label(semantic);
    physical_[index(cx, cy)] = physical;
    semantic_[index(cx, cy)] = semantic;
    fields_.clear();  // layers changed, cached fields are stale
    occupancy_field_.reset();
}

std::optional<CellIndex> SemanticGridMap::world_to_cell(const Point2D& p) const {
    const double c = std::cos(origin_.theta), s = std::sin(origin_.theta);
    const double dx = p.x - origin_.x, dy = p.y - origin_.y;
    const double mx = (c * dx + s * dy) / resolution_;
    const double my = (-s * dx + c * dy) / resolution_;
    const int cx = static_cast<int>(std::floor(mx));
    const int cy = static_cast<int>(std::floor(my));
    if (!in_bounds(cx, cy))
        return std::nullopt;
    return CellIndex{cx, cy};
}

Point2D SemanticGridMap::cell_to_world(const CellIndex& cell) const {
    const double c = std::cos(origin_.theta), s = std::sin(origin_.theta);
    const double mx = (cell.x + 0.5) * resolution_;
    const double my = (cell.y + 0.5) * resolution_;
    return Point2D{origin_.x + c * mx - s * my, origin_.y + s * mx + c * my};
}

// ---------------------------------------------------------------------------
// Distance transform: exact squared EDT via per-row/per-column lower envelope
// of parabolas, then a sqrt + clamp pass.
// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance lower envelope (Felzenszwalb & Huttenlocher).
void edt_1d(const double* f, double* out, int n, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == kInf)
            continue;
        double s;
        while (true) {
            if (f[v[k]] == kInf) {
                // No finite parabola yet; this one takes over everywhere.
                k--;
                if (k < 0)
                    break;
                continue;
            }
            s = ((f[q] + static_cast<double>(q) * q) - (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * (q - v[k]));
            if (s > z[k])
                break;
            k--;
            if (k < 0)
                break;
        }
        k++;
        v[k] = q;
        z[k] = (k == 0) ? -kInf : s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q)
            k++;
        const double d = static_cast<double>(q) - v[k];
        out[q] = (f[v[k]] == kInf) ? kInf : d * d + f[v[k]];
    }
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<uint8_t>& mask, int width,
                                               int height) {
    std::vector<double> d(static_cast<size_t>(width) * height);
    for (size_t i = 0; i < d.size(); ++i)
        d[i] = mask[i] ? 0.0 : kInf;

    const int n = std::max(width, height);
    std::vector<double> f(n), out(n), z(n + 1);
    std::vector<int> v(n);

    // Columns first, then rows.
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y)
            f[y] = d[static_cast<size_t>(y) * width + x];
        edt_1d(f.data(), out.data(), height, v.data(), z.data());
        for (int y = 0; y < height; ++y)
            d[static_cast<size_t>(y) * width + x] = out[y];
    }
    for (int y = 0; y < height; ++y) {
        double* row = d.data() + static_cast<size_t>(y) * width;
        std::copy(row, row + width, f.begin());
        edt_1d(f.data(), out.data(), width, v.data(), z.data());
        std::copy(out.begin(), out.begin() + width, row);
    }
    return d;
}

namespace {

DistanceField field_from_mask(const std::vector<uint8_t>& mask, int width, int height,
                              double resolution, double d_max) {
    DistanceField field;
    field.width = width;
    field.height = height;
    field.resolution = resolution;
    field.d_max = d_max;
    const auto d2 = squared_distance_transform(mask, width, height);
    field.dist.resize(d2.size());
    for (size_t i = 0; i < d2.size(); ++i) {
        const double d = (d2[i] == kInf) ? d_max : std::sqrt(d2[i]) * resolution;
        field.dist[i] = std::min(d, d_max);
    }
    return field;
}

}  // namespace

void SemanticGridMap::build_distance_fields(const std::vector<LabelId>& labels, double d_max) {
    if (d_max <= 0.0)
        throw std::invalid_argument("d_max must be positive");
    std::vector<uint8_t> mask(physical_.size());
    for (LabelId label : labels) {
        check_label(label);
        for (size_t i = 0; i < semantic_.size(); ++i)
            mask[i] = (semantic_[i] == label) ? 1 : 0;
        fields_[label] = field_from_mask(mask, width_, height_, resolution_, d_max);
    }
    for (size_t i = 0; i < physical_.size(); ++i)
        mask[i] = (physical_[i] != kCellFree) ? 1 : 0;
    occupancy_field_ = field_from_mask(mask, width_, height_, resolution_, d_max);
}

void SemanticGridMap::build_all_distance_fields(double d_max) {
    std::vector<LabelId> labels;
    for (LabelId id = 0; id < classes_.size(); ++id)
        labels.push_back(id);
    build_distance_fields(labels, d_max);
}

const DistanceField& SemanticGridMap::field(LabelId label) const {
    auto it = fields_.find(label);
    if (it == fields_.end())
        throw std::logic_error("distance field for label " + std::to_string(label) +
                               " not built; call build_distance_fields first");
    return it->second;
}

const DistanceField& SemanticGridMap::occupancy_field() const {
    if (!occupancy_field_)
        throw std::logic_error("occupancy distance field not built; call build_distance_fields");
    return *occupancy_field_;
}

namespace {

double lookup(const SemanticGridMap& map, const DistanceField& field, const Point2D& p,
              bool bilinear) {
    if (!bilinear) {
        auto cell = map.world_to_cell(p);
        if (!cell)
            return field.d_max;
        return field.at(cell->x, cell->y);
    }
    // Bilinear over the four surrounding cell centers.
    const Pose2D& o = map.origin();
    const double c = std::cos(o.theta), s = std::sin(o.theta);
    const double dx = p.x - o.x, dy = p.y - o.y;
    const double mx = (c * dx + s * dy) / map.resolution() - 0.5;
    const double my = (-s * dx + c * dy) / map.resolution() - 0.5;
    const int x0 = static_cast<int>(std::floor(mx));
    const int y0 = static_cast<int>(std::floor(my));
    const double fx = mx - x0, fy = my - y0;
    auto sample = [&](int cx, int cy) {
        if (cx < 0 || cx >= field.width || cy < 0 || cy >= field.height)
            return field.d_max;
        return field.at(cx, cy);
    };
    if (x0 < -1 || x0 >= field.width || y0 < -1 || y0 >= field.height)
        return field.d_max;
    const double d00 = sample(x0, y0), d10 = sample(x0 + 1, y0);
    const double d01 = sample(x0, y0 + 1), d11 = sample(x0 + 1, y0 + 1);
    return (1 - fx) * (1 - fy) * d00 + fx * (1 - fy) * d10 + (1 - fx) * fy * d01 + fx * fy * d11;
}

}  // namespace

double SemanticGridMap::closest_distance(LabelId label, const Point2D& p, bool bilinear) const {
    return lookup(*this, field(label), p, bilinear);
}

double SemanticGridMap::closest_obstacle_distance(const Point2D& p, bool bilinear) const {
    return lookup(*this, occupancy_field(), p, bilinear);
}

// ---------------------------------------------------------------------------
// File I/O. Self-describing text format, '#' starts a trailing comment.
// ---------------------------------------------------------------------------

namespace {

std::string strip_comment(const std::string& line) {
    auto pos = line.find('#');
    std::string s = (pos == std::string::npos) ? line : line.substr(0, pos);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.pop_back();
    return s;
}

class LineReader {
public:
    LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    // Next non-empty line, comments stripped.
    std::string next(const std::string& expectation) {
        std::string raw;
        while (std::getline(in_, raw)) {
            ++line_;
            std::string s = strip_comment(raw);
            if (!s.empty())
                return s;
        }
        throw ParseError(path_, line_, "unexpected end of file, expected " + expectation);
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_, what); }
    int line() const { return line_; }

private:
    std::istream& in_;
    std::string path_;
    int line_ = 0;
};

}  // namespace

SemanticGridMap SemanticGridMap::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open map file: " + path);
    LineReader reader(in, path);

    auto read_kv = [&](const std::string& key) {
        std::string line = reader.next("'" + key + "'");
        std::istringstream ss(line);
        std::string k;
        ss >> k;
        if (k != key)
            reader.fail("expected '" + key + "', got '" + k + "'");
        return ss;
    };

    int width = 0, height = 0;
    double resolution = 0.0;
    {
        auto ss = read_kv("width");
        if (!(ss >> width) || width <= 0)
            reader.fail("width must be a positive integer");
    }
    {
        auto ss = read_kv("height");
        if (!(ss >> height) || height <= 0)
            reader.fail("height must be a positive integer");
    }
    {
        auto ss = read_kv("resolution");
        if (!(ss >> resolution))
            reader.fail("resolution must be a number");
        if (resolution <= 0.0)
            reader.fail("nonpositive resolution");
    }
    Pose2D origin;
    {
        auto ss = read_kv("origin");
        double x, y, th;
        if (!(ss >> x >> y >> th))
            reader.fail("origin must be 'origin X Y THETA'");
        origin = Pose2D(x, y, th);
    }
    int class_count = 0;
    {
        auto ss = read_kv("classes");
        if (!(ss >> class_count) || class_count < 2)
            reader.fail("classes must be an integer >= 2");
    }
    ClassTable classes;
    for (int i = 0; i < class_count; ++i) {
        std::istringstream ss(reader.next("class entry"));
        int id;
        std::string name;
        if (!(ss >> id >> name))
            reader.fail("class entry must be 'id name'");
        try {
            classes.add(static_cast<LabelId>(id), name);
        } catch (const std::invalid_argument& e) {
            reader.fail(e.what());
        }
    }

    SemanticGridMap map(width, height, resolution, origin, classes);

    auto read_layer = [&](const std::string& header, bool physical) {
        std::string line = reader.next("'" + header + "'");
        if (line != header)
            reader.fail("expected '" + header + "', got '" + line + "'");
        for (int cy = 0; cy < height; ++cy) {
            std::istringstream ss(reader.next(header + " row"));
            for (int cx = 0; cx < width; ++cx) {
                int v;
                if (!(ss >> v))
                    reader.fail(header + " row " + std::to_string(cy) + " has fewer than " +
                                std::to_string(width) + " entries (column " + std::to_string(cx) +
                                ")");
                if (physical) {
                    if (v != kCellFree && !classes.contains(static_cast<LabelId>(v)))
                        reader.fail("physical label id " + std::to_string(v) +
                                    " outside class table");
                    map.physical_[map.index(cx, cy)] = static_cast<LabelId>(v);
                } else {
                    if (!classes.contains(static_cast<LabelId>(v)))
                        reader.fail("semantic label id " + std::to_string(v) +
                                    " outside class table");
                    map.semantic_[map.index(cx, cy)] = static_cast<LabelId>(v);
                }
            }
            int extra;
            if (ss >> extra)
                reader.fail(header + " row " + std::to_string(cy) + " has more than " +
                            std::to_string(width) + " entries");
        }
    };
    read_layer("physical", true);
    read_layer("semantic", false);

    for (int cy = 0; cy < height; ++cy)
        for (int cx = 0; cx < width; ++cx)
            if (map.occupied(cx, cy) && map.semantic(cx, cy) == kLabelFree)
                throw ParseError(path, reader.line(),
                                 "occupied cell (" + std::to_string(cx) + "," +
                                     std::to_string(cy) + ") has free semantic label");
    return map;
}

void SemanticGridMap::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write map file: " + path);
    out.precision(17);
    out << "width " << width_ << "\n";
    out << "height " << height_ << "\n";
    out << "resolution " << resolution_ << "\n";
    out << "origin " << origin_.x << " " << origin_.y << " " << origin_.theta << "\n";
    out << "classes " << classes_.size() << "\n";
    for (LabelId id = 0; id < classes_.size(); ++id)
        out << id << " " << classes_.name(id) << "\n";
    out << "physical\n";
    for (int cy = 0; cy < height_; ++cy) {
        for (int cx = 0; cx < width_; ++cx)
            out << (cx ? " " : "") << physical_[index(cx, cy)];
        out << "\n";
    }
    out << "semantic\n";
    for (int cy = 0; cy < height_; ++cy) {
        for (int cx = 0; cx < width_; ++cx)
            out << (cx ? " " : "") << semantic_[index(cx, cy)];
        out << "\n";
    }
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

bool SemanticGridMap::operator==(const SemanticGridMap& other) const {
    if (width_ != other.width_ || height_ != other.height_ || resolution_ != other.resolution_)
        return false;
    if (origin_.x != other.origin_.x || origin_.y != other.origin_.y ||
        origin_.theta != other.origin_.theta)
        return false;
    if (classes_.size() != other.classes_.size())
        return false;
    for (LabelId id = 0; id < classes_.size(); ++id)
        if (classes_.name(id) != other.classes_.name(id))
            return false;
    return physical_ == other.physical_ && semantic_ == other.semantic_;
}

}  // namespace semloc
