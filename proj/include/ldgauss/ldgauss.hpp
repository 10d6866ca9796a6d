#pragma once

#include "ldgauss/common.hpp"
#include "ldgauss/datagen.hpp"
#include "ldgauss/eigen_utils.hpp"
#include "ldgauss/gmm.hpp"
#include "ldgauss/gmm_model.hpp"
#include "ldgauss/hermite.hpp"
#include "ldgauss/listdecode.hpp"
#include "ldgauss/multi_index.hpp"
#include "ldgauss/multifilter.hpp"
#include "ldgauss/oracle.hpp"
#include "ldgauss/point_set.hpp"
#include "ldgauss/rng.hpp"
#include "ldgauss/sym_tensor.hpp"
