#include "mipa/metrics_log.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mipa {

void MetricsRecord::set_eval(const EvalReport& report) {
    has_eval = true;
    if (report.rgb) {
        ap50_rgb = report.rgb->ap50;
        ap75_rgb = report.rgb->ap75;
        ap_rgb = report.rgb->ap;
    }
    if (report.ir) {
        ap50_ir = report.ir->ap50;
        ap75_ir = report.ir->ap75;
        ap_ir = report.ir->ap;
    }
    ap50_avg = report.average.ap50;
    ap75_avg = report.average.ap75;
    ap_avg = report.average.ap;
}

namespace {

void append_cell(std::string& line, double value, bool last = false) {
    if (std::isfinite(value)) {
        char buffer[40];
        std::snprintf(buffer, sizeof(buffer), "%.17g", value);
        line += buffer;
    }
    if (!last) line += ',';
}

double parse_cell(const std::string& cell) {
    if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::stod(cell);
}

} // namespace

std::string MetricsLog::to_csv() const {
    std::string text = kHeader;
    text += '\n';
    for (const MetricsRecord& r : records_) {
        std::string line = std::to_string(r.epoch) + ',' + std::to_string(r.step) + ',';
        append_cell(line, r.progress);
        append_cell(line, r.l_det);
        append_cell(line, r.l_ma);
        append_cell(line, r.lambda_ma);
        append_cell(line, r.l_total);
        append_cell(line, r.rho);
        append_cell(line, r.ap50_rgb);
        append_cell(line, r.ap50_ir);
        append_cell(line, r.ap50_avg);
        append_cell(line, r.ap75_rgb);
        append_cell(line, r.ap75_ir);
        append_cell(line, r.ap75_avg);
        append_cell(line, r.ap_rgb);
        append_cell(line, r.ap_ir);
        append_cell(line, r.ap_avg, true);
        text += line;
        text += '\n';
    }
    return text;
}

void MetricsLog::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics csv " + path);
    out << to_csv();
}

MetricsLog MetricsLog::from_csv_text(const std::string& text) {
    MetricsLog log;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) return log;
    if (line != kHeader) throw std::runtime_error("unexpected metrics csv header: " + line);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        cells.resize(17);

        MetricsRecord r;
        r.epoch = std::stoi(cells[0]);
        r.step = std::stol(cells[1]);
        r.progress = parse_cell(cells[2]);
        r.l_det = parse_cell(cells[3]);
        r.l_ma = parse_cell(cells[4]);
        r.lambda_ma = parse_cell(cells[5]);
        r.l_total = parse_cell(cells[6]);
        r.rho = parse_cell(cells[7]);
        r.ap50_rgb = parse_cell(cells[8]);
        r.ap50_ir = parse_cell(cells[9]);
        r.ap50_avg = parse_cell(cells[10]);
        r.ap75_rgb = parse_cell(cells[11]);
        r.ap75_ir = parse_cell(cells[12]);
        r.ap75_avg = parse_cell(cells[13]);
        r.ap_rgb = parse_cell(cells[14]);
        r.ap_ir = parse_cell(cells[15]);
        r.ap_avg = parse_cell(cells[16]);
        r.has_eval = std::isfinite(r.ap50_avg);
        log.add(r);
    }
    return log;
}

MetricsLog MetricsLog::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read metrics csv " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_csv_text(buffer.str());
}

} // namespace mipa
