# tandemnet tests package
