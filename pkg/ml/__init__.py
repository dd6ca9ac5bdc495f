"""
Model package for the sign segmenter.
Contains the keypoint data types, SVD features and the window predictors.
"""
