values = [
    3,
    1,
    2,
]
total = sum(
    values)
print(total)
