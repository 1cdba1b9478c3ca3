"""Census of cubic surfaces over finite fields."""
