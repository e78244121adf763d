#ifndef LPVSSID_TYPES_HPP
#define LPVSSID_TYPES_HPP

#include <Eigen/Dense>
#include <vector>

namespace lpvssid {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;
using MatList = std::vector<Mat>;

// Operating regime of the data-equations: the open-loop form runs on the
// extended input [u; xi], the closed-loop (predictor) form on [u; y].
enum class Mode { open_loop, closed_loop };

} // namespace lpvssid

#endif
