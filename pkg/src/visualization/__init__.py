# Módulo para gráficos y estadísticas 