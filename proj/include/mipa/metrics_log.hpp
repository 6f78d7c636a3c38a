#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mipa/evalkit.hpp"

namespace mipa {

// One logging event: loss rows every log_every steps, eval rows at epoch
// end. Unset fields stay NaN and serialize as empty CSV cells.
struct MetricsRecord {
    int epoch = 0;
    long step = -1;
    double progress = std::numeric_limits<double>::quiet_NaN(); // s in [0, 1]
    double l_det = std::numeric_limits<double>::quiet_NaN();
    double l_ma = std::numeric_limits<double>::quiet_NaN();
    double lambda_ma = std::numeric_limits<double>::quiet_NaN();
    double l_total = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();
    bool has_eval = false;
    double ap50_rgb = std::numeric_limits<double>::quiet_NaN();
    double ap50_ir = std::numeric_limits<double>::quiet_NaN();
    double ap50_avg = std::numeric_limits<double>::quiet_NaN();
    double ap75_rgb = std::numeric_limits<double>::quiet_NaN();
    double ap75_ir = std::numeric_limits<double>::quiet_NaN();
    double ap75_avg = std::numeric_limits<double>::quiet_NaN();
    double ap_rgb = std::numeric_limits<double>::quiet_NaN();
    double ap_ir = std::numeric_limits<double>::quiet_NaN();
    double ap_avg = std::numeric_limits<double>::quiet_NaN();

    void set_eval(const EvalReport& report);
};

class MetricsLog {
public:
    static constexpr const char* kHeader =
        "epoch,step,progress,l_det,l_ma,lambda_ma,l_total,rho,"
        "ap50_rgb,ap50_ir,ap50_avg,ap75_rgb,ap75_ir,ap75_avg,ap_rgb,ap_ir,ap_avg";

    void add(const MetricsRecord& record) { records_.push_back(record); }
    const std::vector<MetricsRecord>& records() const { return records_; }

    void write_csv(const std::string& path) const;
    std::string to_csv() const;
    static MetricsLog from_csv_text(const std::string& text);
    static MetricsLog read_csv(const std::string& path);

private:
    std::vector<MetricsRecord> records_;
};

} // namespace mipa
