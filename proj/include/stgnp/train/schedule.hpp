#pragma once

#include <limits>

namespace stgnp::train {

/// Reduce-on-plateau learning-rate schedule: divide the rate by `factor` once
/// a monitored metric has failed to improve for `patience` consecutive
/// epochs, never dropping below `min_lr`.
class PlateauSchedule {
public:
    PlateauSchedule(double initial_lr, double factor, int patience, double min_lr)
        : lr_(initial_lr), factor_(factor), patience_(patience), min_lr_(min_lr) {}

    double lr() const { return lr_; }

    /// Feed one epoch's metric (lower is better); returns true if the rate
    /// was reduced this epoch.
    bool observe(double metric) {
        if (metric < best_) {
            best_ = metric;
            bad_epochs_ = 0;
            return false;
        }
        ++bad_epochs_;
        if (bad_epochs_ >= patience_) {
            bad_epochs_ = 0;
            const double next = lr_ / factor_;
            if (next >= min_lr_) {
                lr_ = next;
                return true;
            }
            if (lr_ > min_lr_) {
                lr_ = min_lr_;
                return true;
            }
        }
        return false;
    }

private:
    double lr_;
    double factor_;
    int patience_;
    double min_lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
};

/// Fixed schedule: halve the rate every `period` epochs.
class HalvingSchedule {
public:
    HalvingSchedule(double initial_lr, int period, double min_lr)
        : lr_(initial_lr), period_(period), min_lr_(min_lr) {}

    double lr() const { return lr_; }

    bool observe_epoch(int epoch_index) {
        // epoch_index counts from 1; halve right after each full period.
        if (period_ > 0 && epoch_index % period_ == 0 && lr_ / 2.0 >= min_lr_) {
            lr_ /= 2.0;
            return true;
        }
        return false;
    }

private:
    double lr_;
    int period_;
    double min_lr_;
};

}  // namespace stgnp::train
