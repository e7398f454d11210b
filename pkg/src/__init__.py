# Motor visuo-propioceptivo predictivo multi-escala
