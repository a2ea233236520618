#include "surfspline/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "surfspline/errors.hpp"

namespace surfspline {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string_view> split_ws(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t b = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > b) out.push_back(line.substr(b, i - b));
    }
    return out;
}

double parse_double(std::string_view s, std::size_t line)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw LoadError("expected a number, found '" + std::string(s) + "'", line);
    }
    return v;
}

long parse_int(std::string_view s, std::size_t line)
{
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw LoadError("expected an integer, found '" + std::string(s) + "'", line);
    }
    return v;
}

std::string format_double(double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string(), 0);
    return in;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string(), 0);
    return out;
}

// Reads data lines, skipping blanks and '#' comments; tracks 1-based line numbers.
class LineReader {
public:
    explicit LineReader(std::istream& in)
        : in_(in)
    {
    }

    bool next(std::string& line)
    {
        while (std::getline(in_, line)) {
            ++number_;
            const auto t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            line = std::string(t);
            return true;
        }
        return false;
    }

    std::size_t number() const { return number_; }

private:
    std::istream& in_;
    std::size_t number_ = 0;
};

} // namespace

TriangleMesh read_off(const std::filesystem::path& path, Chart chart)
{
    auto in = open_in(path);
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw LoadError("empty OFF file " + path.string(), reader.number());

    auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0] != "OFF") throw LoadError("missing OFF header", reader.number());
    tokens.erase(tokens.begin());
    if (tokens.empty()) {
        if (!reader.next(line)) throw LoadError("missing OFF counts", reader.number());
        tokens = split_ws(line);
    }
    if (tokens.size() < 2) throw LoadError("OFF counts need vertex and face numbers", reader.number());
    const long nv = parse_int(tokens[0], reader.number());
    const long nf = parse_int(tokens[1], reader.number());
    if (nv < 0 || nf < 0) throw LoadError("negative OFF counts", reader.number());

    std::vector<Vec3> verts;
    verts.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!reader.next(line)) throw LoadError("OFF ends before vertex " + std::to_string(i), reader.number());
        const auto t = split_ws(line);
        if (t.size() < 3) throw LoadError("vertex " + std::to_string(i) + " needs 3 coordinates", reader.number());
        verts.emplace_back(parse_double(t[0], reader.number()), parse_double(t[1], reader.number()),
                           parse_double(t[2], reader.number()));
    }
    std::vector<Triangle> tris;
    tris.reserve(static_cast<std::size_t>(nf));
    for (long f = 0; f < nf; ++f) {
        if (!reader.next(line)) throw LoadError("OFF ends before face " + std::to_string(f), reader.number());
        const auto t = split_ws(line);
        const long k = t.empty() ? 0 : parse_int(t[0], reader.number());
        if (k != 3) {
            throw LoadError("face " + std::to_string(f) + " has " + std::to_string(k) + " vertices; only triangles are supported",
                            reader.number());
        }
        if (t.size() < 4) throw LoadError("face " + std::to_string(f) + " lists fewer than 3 indices", reader.number());
        Triangle tri{};
        for (int c = 0; c < 3; ++c) {
            const long idx = parse_int(t[static_cast<std::size_t>(c) + 1], reader.number());
            if (idx < 0 || idx >= nv) {
                throw LoadError("face " + std::to_string(f) + " references missing vertex " + std::to_string(idx),
                                reader.number());
            }
            tri[static_cast<std::size_t>(c)] = static_cast<int>(idx);
        }
        tris.push_back(tri);
    }
    try {
        return TriangleMesh(std::move(verts), std::move(tris), std::move(chart));
    } catch (const ParameterError& e) {
        throw LoadError(path.string() + ": " + e.what(), 0);
    }
}

void write_off(const TriangleMesh& mesh, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' ' << mesh.num_edges() << '\n';
    for (const auto& v : mesh.vertices()) {
        out << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
    }
    for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

Chart read_chart(const std::filesystem::path& path, std::size_t num_vertices)
{
    auto in = open_in(path);
    std::string line;
    std::size_t number = 0;
    Chart chart;
    std::vector<char> seen(num_vertices, 0);
    chart.coords.assign(num_vertices, Vec2::Zero());
    std::size_t count = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto pos = t.find("chart=");
            if (pos != std::string_view::npos) {
                const auto tag = trim(t.substr(pos + 6));
                if (tag == "spherical") chart.kind = ChartKind::spherical;
                else if (tag == "cylindrical") chart.kind = ChartKind::cylindrical;
                else throw LoadError("unknown chart tag '" + std::string(tag) + "'", number);
            }
            continue;
        }
        const auto fields = split(t, ',');
        if (fields.size() == 3 && fields[0] == "vertex_index") continue;
        if (fields.size() != 3) throw LoadError("chart rows need vertex_index,u,v", number);
        const long idx = parse_int(fields[0], number);
        if (idx < 0 || static_cast<std::size_t>(idx) >= num_vertices) {
            throw LoadError("chart row references missing vertex " + std::to_string(idx), number);
        }
        if (seen[static_cast<std::size_t>(idx)]++) throw LoadError("vertex " + std::to_string(idx) + " repeated", number);
        chart.coords[static_cast<std::size_t>(idx)] = Vec2(parse_double(fields[1], number), parse_double(fields[2], number));
        ++count;
    }
    if (chart.kind == ChartKind::none) throw LoadError("chart file lacks a '# chart=' header", 0);
    if (count != num_vertices) {
        throw LoadError("chart has " + std::to_string(count) + " rows for " + std::to_string(num_vertices) + " vertices",
                        number);
    }
    return chart;
}

void write_chart(const TriangleMesh& mesh, const std::filesystem::path& path)
{
    if (!mesh.has_chart()) throw ChartError("mesh has no chart to write");
    auto out = open_out(path);
    out << "# chart=" << (mesh.chart().kind == ChartKind::spherical ? "spherical" : "cylindrical") << '\n';
    out << "vertex_index,u,v\n";
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        const auto& c = mesh.chart().coords[i];
        out << i << ',' << format_double(c[0]) << ',' << format_double(c[1]) << '\n';
    }
}

TriangleMesh load_mesh(const std::filesystem::path& off, const std::optional<std::filesystem::path>& chart)
{
    TriangleMesh mesh = read_off(off);
    if (!chart) return mesh;
    Chart c = read_chart(*chart, mesh.num_vertices());
    return TriangleMesh(mesh.vertices(), mesh.triangles(), std::move(c));
}

Observations read_observations(const std::filesystem::path& path)
{
    auto in = open_in(path);
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw LoadError("observation file " + path.string() + " is empty", reader.number());
    const auto header = split(line, ',');
    const bool node_mode = header.size() == 2 && header[0] == "node_index" && header[1] == "value";
    const bool point_mode =
        header.size() == 4 && header[0] == "x" && header[1] == "y" && header[2] == "z" && header[3] == "value";
    if (!node_mode && !point_mode) {
        throw LoadError("observation header must be 'node_index,value' or 'x,y,z,value'", reader.number());
    }

    std::vector<int> nodes;
    std::vector<Vec3> points;
    std::vector<double> values;
    while (reader.next(line)) {
        const auto f = split(line, ',');
        if (f.size() != header.size()) {
            throw LoadError("expected " + std::to_string(header.size()) + " fields", reader.number());
        }
        if (node_mode) {
            nodes.push_back(static_cast<int>(parse_int(f[0], reader.number())));
            values.push_back(parse_double(f[1], reader.number()));
        } else {
            points.emplace_back(parse_double(f[0], reader.number()), parse_double(f[1], reader.number()),
                                parse_double(f[2], reader.number()));
            values.push_back(parse_double(f[3], reader.number()));
        }
    }
    if (values.empty()) throw LoadError("observation file has no data rows", reader.number());
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    Observations obs = node_mode ? Observations::at_nodes(std::move(nodes), std::move(y))
                                 : Observations::at_points(std::move(points), std::move(y), 0.0);
    return obs;
}

void write_observations(const Observations& obs, const std::filesystem::path& path)
{
    auto out = open_out(path);
    if (obs.mode == Observations::Mode::node) {
        out << "node_index,value\n";
        for (std::size_t i = 0; i < obs.size(); ++i) {
            out << obs.nodes[i] << ',' << format_double(obs.values[static_cast<Eigen::Index>(i)]) << '\n';
        }
    } else {
        out << "x,y,z,value\n";
        for (std::size_t i = 0; i < obs.size(); ++i) {
            const auto& p = obs.points[i];
            out << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z()) << ','
                << format_double(obs.values[static_cast<Eigen::Index>(i)]) << '\n';
        }
    }
}

MetricField read_metric(const std::filesystem::path& path, std::size_t num_vertices)
{
    auto in = open_in(path);
    LineReader reader(in);
    std::string line;
    std::vector<AnisotropyParams> params(num_vertices);
    std::vector<char> seen(num_vertices, 0);
    std::size_t count = 0;
    bool first = true;
    while (reader.next(line)) {
        const auto f = split(line, ',');
        if (first && f.size() == 4 && f[0] == "vertex_index") {
            first = false;
            continue;
        }
        first = false;
        if (f.size() != 4) throw LoadError("metric rows need vertex_index,delta,rho1,rho2", reader.number());
        const long idx = parse_int(f[0], reader.number());
        if (idx < 0 || static_cast<std::size_t>(idx) >= num_vertices) {
            throw LoadError("metric row references missing vertex " + std::to_string(idx), reader.number());
        }
        if (seen[static_cast<std::size_t>(idx)]++) {
            throw LoadError("vertex " + std::to_string(idx) + " repeated", reader.number());
        }
        auto& p = params[static_cast<std::size_t>(idx)];
        p.delta = parse_double(f[1], reader.number());
        p.rho1 = parse_double(f[2], reader.number());
        p.rho2 = parse_double(f[3], reader.number());
        if (!(p.rho1 > 0.0) || !(p.rho2 > 0.0)) throw LoadError("scalings must be positive", reader.number());
        ++count;
    }
    if (count != num_vertices) {
        throw LoadError("metric has " + std::to_string(count) + " rows for " + std::to_string(num_vertices) + " vertices",
                        reader.number());
    }
    return MetricField::per_node(std::move(params));
}

void write_metric(const std::vector<AnisotropyParams>& params, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "vertex_index,delta,rho1,rho2\n";
    for (std::size_t i = 0; i < params.size(); ++i) {
        out << i << ',' << format_double(params[i].delta) << ',' << format_double(params[i].rho1) << ','
            << format_double(params[i].rho2) << '\n';
    }
}

void write_predictions(const Eigen::VectorXd& values, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "vertex_index,prediction\n";
    for (Eigen::Index i = 0; i < values.size(); ++i) out << i << ',' << format_double(values[i]) << '\n';
}

Eigen::VectorXd read_predictions(const std::filesystem::path& path)
{
    auto in = open_in(path);
    LineReader reader(in);
    std::string line;
    std::vector<double> values;
    while (reader.next(line)) {
        const auto f = split(line, ',');
        if (f.size() == 2 && f[0] == "vertex_index") continue;
        if (f.size() != 2) throw LoadError("prediction rows need vertex_index,prediction", reader.number());
        const long idx = parse_int(f[0], reader.number());
        if (idx != static_cast<long>(values.size())) throw LoadError("prediction rows must be in vertex order", reader.number());
        values.push_back(parse_double(f[1], reader.number()));
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

} // namespace surfspline
