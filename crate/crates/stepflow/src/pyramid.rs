use flowcore::Image;

/// Smallest allowed pyramid level extent.
pub(crate) const MIN_LEVEL_DIM: usize = 16;

/// Build a box-filtered image pyramid, level 0 being the input. Levels are
/// added while the next level stays at least 16 px in both dimensions, up
/// to `max_levels` total.
pub(crate) fn build_pyramid(gray: &Image, max_levels: usize) -> Vec<Image> {
    debug_assert_eq!(gray.channels(), 1);
    let mut levels = vec![gray.clone()];
    while levels.len() < max_levels {
        let prev = levels.last().unwrap();
        let nw = prev.width().div_ceil(2);
        let nh = prev.height().div_ceil(2);
        if nw < MIN_LEVEL_DIM || nh < MIN_LEVEL_DIM {
            break;
        }
        levels.push(downsample2(prev));
    }
    levels
}

/// 2x2 box average with edge clamping on odd extents.
fn downsample2(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let data = img.data();
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let y0 = 2 * y;
        let y1 = (2 * y + 1).min(h - 1);
        for x in 0..nw {
            let x0 = 2 * x;
            let x1 = (2 * x + 1).min(w - 1);
            let v = 0.25
                * (data[y0 * w + x0] + data[y0 * w + x1] + data[y1 * w + x0] + data[y1 * w + x1]);
            out.push(v);
        }
    }
    Image::new(nw, nh, 1, out).expect("averages remain in range")
}
