# Routes package initialization