#pragma once

#include "gmmcalib/common.hpp"
#include "gmmcalib/se3.hpp"
#include "gmmcalib/alignment.hpp"
#include "gmmcalib/point_cloud.hpp"
#include "gmmcalib/cloud_io.hpp"
#include "gmmcalib/gmm_registration.hpp"
#include "gmmcalib/icp.hpp"
#include "gmmcalib/scene.hpp"
#include "gmmcalib/calibration.hpp"
#include "gmmcalib/evaluation.hpp"
#include "gmmcalib/config.hpp"
