#pragma once

// Umbrella header for the fingerprint presentation-attack-detection library:
// dense-SIFT local features, BoW / Fisher Vector / VLAD encodings over a
// learned visual vocabulary, dual linear-SVM scoring with weighted fusion,
// and ISO/IEC 30107-style evaluation with DET curves.

#include "fpad/common.hpp"
#include "fpad/config.hpp"
#include "fpad/corpus.hpp"
#include "fpad/dense_sift.hpp"
#include "fpad/encode.hpp"
#include "fpad/eval.hpp"
#include "fpad/gmm.hpp"
#include "fpad/image.hpp"
#include "fpad/kmeans.hpp"
#include "fpad/linalg.hpp"
#include "fpad/manifest.hpp"
#include "fpad/matrix.hpp"
#include "fpad/model_io.hpp"
#include "fpad/parallel.hpp"
#include "fpad/pca.hpp"
#include "fpad/pipeline.hpp"
#include "fpad/protocol.hpp"
#include "fpad/rng.hpp"
#include "fpad/svm.hpp"
