use super::{BinaryMask, RasterError};

/// Set pixels with at least one 4-neighbor that is unset or outside the frame.
pub fn boundary_pixels(mask: &BinaryMask) -> impl Iterator<Item = (usize, usize)> + '_ {
    mask.iter_set().filter(move |&(x, y)| {
        let (x, y) = (x as i64, y as i64);
        !mask.get_signed(x + 1, y)
            || !mask.get_signed(x - 1, y)
            || !mask.get_signed(x, y + 1)
            || !mask.get_signed(x, y - 1)
    })
}

/// Pixels within Euclidean distance `radius` (center to center) of
/// `instance`, excluding every pixel of `all_potholes` and of `instance`.
///
/// The nearest instance pixel to any outside pixel is a boundary pixel, so
/// only boundary pixels are stamped with the disk.
pub fn surrounding_band(
    instance: &BinaryMask,
    all_potholes: &BinaryMask,
    radius: usize,
) -> Result<BinaryMask, RasterError> {
    instance.same_dims(all_potholes)?;
    let (w, h) = (instance.width() as i64, instance.height() as i64);
    let r = radius as i64;
    let disk: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();

    let mut band = BinaryMask::new(instance.width(), instance.height())?;
    for (x, y) in boundary_pixels(instance) {
        for &(dx, dy) in &disk {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < w && ny < h {
                band.set(nx as usize, ny as usize, true);
            }
        }
    }
    for i in 0..band.bits().len() {
        let (x, y) = (i % instance.width(), i / instance.width());
        if band.get(x, y) && (instance.get(x, y) || all_potholes.get(x, y)) {
            band.set(x, y, false);
        }
    }
    Ok(band)
}
