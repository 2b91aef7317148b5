#pragma once

#include "posenc/tensor.hpp"
#include "posenc/tape.hpp"
#include "posenc/ops.hpp"
#include "posenc/gradcheck.hpp"
#include "posenc/params.hpp"
#include "posenc/pose_streams.hpp"
#include "posenc/attention.hpp"
#include "posenc/recurrent.hpp"
#include "posenc/model.hpp"
#include "posenc/data/skeleton.hpp"
#include "posenc/data/preprocess.hpp"
#include "posenc/data/synthetic.hpp"
#include "posenc/data/formats.hpp"
#include "posenc/data/dataset.hpp"
#include "posenc/config.hpp"
#include "posenc/checkpoint.hpp"
#include "posenc/training.hpp"
#include "posenc/ablation.hpp"
#include "posenc/gradcheck_suite.hpp"
