# tandemnet analytics package
